#include "cofc/drive_cycle.hpp"

#include "cofc/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace cofc {
namespace {

constexpr double kKmhPerMs = 3.6;
constexpr double kSpacingTolerance = 1e-9;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

double parse_number(std::string_view field, std::size_t line_no) {
  field = trim(field);
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorCode::MalformedRow,
                "line " + std::to_string(line_no) + ": cannot parse '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

DriveCycle::DriveCycle(Eigen::VectorXd times, Eigen::VectorXd speeds)
    : times_(std::move(times)), speeds_(std::move(speeds)) {
  if (times_.size() != speeds_.size()) {
    throw Error(ErrorCode::MalformedRow, "time and speed columns differ in length");
  }
  if (times_.size() < 2) {
    throw Error(ErrorCode::MalformedRow, "a drive cycle needs at least two samples");
  }
  dt_ = times_[1] - times_[0];
  if (!(dt_ > 0.0)) {
    throw Error(ErrorCode::NonUniformSampling, "sample times must be strictly increasing");
  }
  for (Eigen::Index k = 1; k < times_.size(); ++k) {
    if (std::abs((times_[k] - times_[k - 1]) - dt_) > kSpacingTolerance) {
      throw Error(ErrorCode::NonUniformSampling,
                  "spacing at sample " + std::to_string(k) + " deviates from dt");
    }
  }
  for (Eigen::Index k = 0; k < speeds_.size(); ++k) {
    if (speeds_[k] < 0.0) {
      throw Error(ErrorCode::NegativeSpeed, "negative speed at sample " + std::to_string(k));
    }
  }
}

double DriveCycle::speed(std::size_t k) const {
  if (k >= size()) throw Error(ErrorCode::IndexOutOfRange, "speed index out of range");
  return speeds_[static_cast<Eigen::Index>(k)];
}

DriveCycle load_cycle(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<double> times;
  std::vector<double> speeds;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    if (!have_header) {
      if (row != "time,speed_kmh") {
        throw Error(ErrorCode::MalformedRow, "expected header 'time,speed_kmh'");
      }
      have_header = true;
      continue;
    }
    const auto comma = row.find(',');
    if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected 2 fields");
    }
    times.push_back(parse_number(row.substr(0, comma), line_no));
    speeds.push_back(parse_number(row.substr(comma + 1), line_no) / kKmhPerMs);
  }
  if (!have_header) throw Error(ErrorCode::MalformedRow, "empty cycle file");
  return DriveCycle(Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size())),
                    Eigen::Map<Eigen::VectorXd>(speeds.data(), static_cast<Eigen::Index>(speeds.size())));
}

DriveCycle load_cycle_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open cycle file " + path);
  return load_cycle(in);
}

void save_cycle(const DriveCycle& cycle, std::ostream& out) {
  out << "time,speed_kmh\n" << std::setprecision(17);
  for (std::size_t k = 0; k < cycle.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out << cycle.times()[i] << ',' << cycle.speeds()[i] * kKmhPerMs << '\n';
  }
}

CycleStats cycle_stats(const DriveCycle& cycle) {
  const auto& v = cycle.speeds();
  const Eigen::Index n = v.size();
  const double area = cycle.dt() * (v.head(n - 1) + v.tail(n - 1)).sum() / 2.0;
  return {area / 1000.0, cycle.times()[n - 1] - cycle.times()[0], v.maxCoeff()};
}

double accel_at(const DriveCycle& cycle, std::size_t step_index) {
  if (step_index >= cycle.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "acceleration index out of range");
  }
  if (step_index + 1 == cycle.size()) return 0.0;
  const auto k = static_cast<Eigen::Index>(step_index);
  return (cycle.speeds()[k + 1] - cycle.speeds()[k]) / cycle.dt();
}

DriveCycle make_trapezoid_cycle(double duration_s, double peak_kmh, double ramp_s, double dt) {
  const auto n = static_cast<Eigen::Index>(std::llround(duration_s / dt)) + 1;
  const double peak = peak_kmh / kKmhPerMs;
  Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(n, 0.0, dt * static_cast<double>(n - 1));
  Eigen::VectorXd speeds(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double t = times[k];
    const double rise = std::clamp(t / ramp_s, 0.0, 1.0);
    const double fall = std::clamp((duration_s - t) / ramp_s, 0.0, 1.0);
    speeds[k] = peak * std::min(rise, fall);
  }
  return DriveCycle(std::move(times), std::move(speeds));
}

DriveCycle make_constant_cycle(double duration_s, double speed_ms, double dt) {
  const auto n = static_cast<Eigen::Index>(std::llround(duration_s / dt)) + 1;
  return DriveCycle(Eigen::VectorXd::LinSpaced(n, 0.0, dt * static_cast<double>(n - 1)),
                    Eigen::VectorXd::Constant(n, speed_ms));
}

}  // namespace cofc
