#include "cofc/plot.hpp"

#include "cofc/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <istream>
#include <limits>
#include <sstream>

namespace cofc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell) {
  double value = kNaN;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || end != cell.data() + cell.size()) return kNaN;
  return value;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += ch;
    }
  }
  return out;
}

/// Round tick step (1, 2 or 5 times a power of ten) giving about `target` ticks.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double base = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * base >= raw) return m * base;
  }
  return 10.0 * base;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

void render_panel(std::ostringstream& svg, const Panel& panel, int top, int width, int height) {
  const int left = 70, right = 150, pad_top = 28, pad_bottom = 42;
  const double plot_w = width - left - right;
  const double plot_h = height - pad_top - pad_bottom;
  Range xr, yr;
  for (const auto& s : panel.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.finish();
  yr.finish();
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double y) { return top + pad_top + (yr.hi - y) / (yr.hi - yr.lo) * plot_h; };

  svg << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"14\" font-weight=\"bold\">{}</text>\n", left,
                     top + 18, escape(panel.title));
  svg << fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"#444\"/>\n", left,
      top + pad_top, plot_w, plot_h);

  const double xs = nice_step(xr.hi - xr.lo, 6);
  for (double x = std::ceil(xr.lo / xs) * xs; x <= xr.hi + 1e-9 * xs; x += xs) {
    svg << fmt::format("<line x1=\"{0:.1f}\" x2=\"{0:.1f}\" y1=\"{1:.1f}\" y2=\"{2:.1f}\" stroke=\"#ddd\"/>\n",
                       px(x), top + pad_top + 0.0, top + pad_top + plot_h);
    svg << fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"middle\">{:g}</text>\n",
                       px(x), top + pad_top + plot_h + 15, x);
  }
  const double ys = nice_step(yr.hi - yr.lo, 5);
  for (double y = std::ceil(yr.lo / ys) * ys; y <= yr.hi + 1e-9 * ys; y += ys) {
    const double yy = std::abs(y) < 1e-12 * ys ? 0.0 : y;
    svg << fmt::format("<line x1=\"{0}\" x2=\"{1:.1f}\" y1=\"{2:.1f}\" y2=\"{2:.1f}\" stroke=\"#ddd\"/>\n", left,
                       left + plot_w, py(yy));
    svg << fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"end\">{:g}</text>\n",
                       left - 6, py(yy) + 4, yy);
  }
  svg << fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                     left + plot_w / 2, top + height - 8, escape(panel.x_label));
  svg << fmt::format(
      "<text x=\"16\" y=\"{0:.1f}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      "{0:.1f})\">{1}</text>\n",
      top + pad_top + plot_h / 2, escape(panel.y_label));

  int legend_y = top + pad_top + 12;
  for (const auto& s : panel.series) {
    std::string points;
    std::vector<std::string> runs;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        if (!points.empty()) runs.push_back(std::move(points));
        points.clear();
        continue;
      }
      points += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
    }
    if (!points.empty()) runs.push_back(std::move(points));
    const std::string dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
    for (const auto& run : runs) {
      svg << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{} points=\"{}\"/>\n",
                         s.color, dash, run);
    }
    svg << fmt::format("<line x1=\"{0:.1f}\" x2=\"{1:.1f}\" y1=\"{2}\" y2=\"{2}\" stroke=\"{3}\" "
                       "stroke-width=\"2\"{4}/>\n",
                       left + plot_w + 10, left + plot_w + 34, legend_y, s.color, dash);
    svg << fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-size=\"11\">{}</text>\n", left + plot_w + 40,
                       legend_y + 4, escape(s.name));
    legend_y += 18;
  }
}

Series series(const CsvTable& t, const std::string& x, const std::string& y, std::string name,
              std::string color, bool dashed = false) {
  return {std::move(name), t.column(x), t.column(y), std::move(color), dashed};
}

}  // namespace

const std::vector<double>& CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::Config, "CSV has no column '" + name + "'");
  return columns[static_cast<std::size_t>(it - header.begin())];
}

bool CsvTable::has(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable read_csv_table(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Config, "CSV file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split(line);
  table.columns.resize(table.header.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw Error(ErrorCode::MalformedRow, "CSV row " + std::to_string(row) + " has the wrong number of cells");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) table.columns[i].push_back(parse_cell(cells[i]));
  }
  return table;
}

std::string render_svg(const std::vector<Panel>& panels, int width, int panel_height) {
  std::ostringstream svg;
  const int height = panel_height * static_cast<int>(panels.size());
  svg << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width, height);
  for (std::size_t i = 0; i < panels.size(); ++i) {
    render_panel(svg, panels[i], static_cast<int>(i) * panel_height, width, panel_height);
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<Panel> trace_panels(const CsvTable& trace) {
  if (trace.rows() == 0) throw Error(ErrorCode::Config, "trace has no epochs to plot");
  std::vector<Panel> panels{
      {"Episode reward", "epoch", "J_r", {series(trace, "epoch", "mean_Jr", "mean J_r", "#1f77b4")}},
      {"Episode cost", "epoch", "J_c", {series(trace, "epoch", "mean_Jc", "mean J_c", "#d62728")}},
  };
  Panel dual{"Multiplier", "epoch", "lambda", {series(trace, "epoch", "lambda", "lambda", "#2ca02c")}};
  if (trace.has("eta")) dual.series.push_back(series(trace, "epoch", "eta", "eta", "#9467bd", true));
  panels.push_back(std::move(dual));
  return panels;
}

std::vector<Panel> episode_panels(const CsvTable& episode) {
  if (episode.rows() == 0) throw Error(ErrorCode::Config, "episode log has no steps to plot");
  return {
      {"Battery SOC",
       "t [s]",
       "SOC",
       {series(episode, "t", "soc", "SOC", "#1f77b4"), series(episode, "t", "upper", "upper", "#7f7f7f", true),
        series(episode, "t", "lower", "lower", "#7f7f7f", true)}},
      {"Power split",
       "t [s]",
       "kW",
       {series(episode, "t", "P_dem", "demand", "#000000"), series(episode, "t", "P_eng", "engine", "#d62728"),
        series(episode, "t", "P_batt", "battery", "#2ca02c")}},
  };
}

}  // namespace cofc
