#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>

namespace cofc {

struct CycleStats {
  double distance_km = 0.0;
  double duration_s = 0.0;
  double max_speed = 0.0;  // m/s
};

/// Reference speed trajectory sampled at a uniform interval.
///
/// Speeds are stored in m/s. The trajectory is immutable once built, so a
/// single instance can be shared by any number of rollout workers.
class DriveCycle {
 public:
  /// Validates the samples: at least two, strictly increasing times with
  /// constant spacing, non-negative speeds.
  DriveCycle(Eigen::VectorXd times, Eigen::VectorXd speeds);

  const Eigen::VectorXd& times() const { return times_; }
  const Eigen::VectorXd& speeds() const { return speeds_; }
  double dt() const { return dt_; }
  std::size_t size() const { return static_cast<std::size_t>(speeds_.size()); }
  /// Number of control steps, one per sampling interval.
  std::size_t steps() const { return size() - 1; }

  double speed(std::size_t k) const;

 private:
  Eigen::VectorXd times_;
  Eigen::VectorXd speeds_;
  double dt_ = 0.0;
};

/// Parses `time,speed_kmh` CSV (header required, CRLF tolerated).
DriveCycle load_cycle(std::istream& in);
DriveCycle load_cycle_file(const std::string& path);
/// Writes the cycle back in the same CSV format with round-trip precision.
void save_cycle(const DriveCycle& cycle, std::ostream& out);

CycleStats cycle_stats(const DriveCycle& cycle);

/// Forward-difference acceleration; zero at the final sample.
double accel_at(const DriveCycle& cycle, std::size_t step_index);

/// Accelerate from rest to `peak_kmh` over `ramp_s`, cruise, then brake to
/// rest over `ramp_s`, sampled every `dt` seconds for `duration_s` seconds.
DriveCycle make_trapezoid_cycle(double duration_s, double peak_kmh, double ramp_s,
                                double dt = 1.0);
DriveCycle make_constant_cycle(double duration_s, double speed_ms, double dt = 1.0);

}  // namespace cofc
