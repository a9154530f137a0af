#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mntk/trajectory.hpp"

namespace mntk {

inline constexpr std::string_view kTrajectoryHeader =
    "step,t,loss,pseudo_loss,residual_norm,max_displacement,lambda_min_H,lyapunov,bound";

/// Writes to a sibling temporary file, then renames it over `path`. Parent
/// directories are created as needed.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

/// Shortest round-trip decimal form; NaN and missing values become "".
std::string format_number(double v);

/// Quotes a field when it contains a comma, quote, CR or LF; quotes are doubled.
std::string csv_field(std::string_view text);
std::string csv_row(const std::vector<std::string>& fields);
/// Splits one CSV record, honouring quoted fields.
std::vector<std::string> parse_csv_row(std::string_view line);

std::string trajectory_csv(const Trajectory& records);
/// Reads a file written by trajectory_csv. Throws FormatError on a bad header
/// or malformed row.
Trajectory read_trajectory_csv(const std::filesystem::path& path);

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
  double stroke_width = 1.5;
  double opacity = 1.0;
  bool in_legend = true;
};

/// Standalone SVG 1.1 line chart with a log10 y axis. Non-positive and
/// non-finite y values break the polyline.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<SvgSeries>& series);

}  // namespace mntk
