#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cofc {

/// Numeric CSV with a header row; blank or non-numeric cells become NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  /// Throws Config when the column is missing.
  const std::vector<double>& column(const std::string& name) const;
  bool has(const std::string& name) const;
};

CsvTable read_csv_table(std::istream& in);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Panels stacked vertically in one SVG document.
std::string render_svg(const std::vector<Panel>& panels, int width = 720, int panel_height = 260);

/// Reward and cost learning curves (plus the multiplier when present).
std::vector<Panel> trace_panels(const CsvTable& trace);
/// SOC against the corridor limits, and engine/battery power.
std::vector<Panel> episode_panels(const CsvTable& episode);

}  // namespace cofc
