#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mntk/experiment.hpp"
#include "mntk/optimizers.hpp"
#include "mntk/output.hpp"

namespace mntk {
namespace {

std::string show(const std::optional<double>& v) {
  if (!v) return {};
  if (std::isinf(*v)) return "inf";
  return format_number(*v);
}

std::string show_flag(const std::optional<bool>& v) {
  if (!v) return {};
  return *v ? "true" : "false";
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return (values[mid - 1] + values[mid]) / 2.0;
}

std::vector<CompareRow> compare_report(const RunManifest& manifest,
                                       const std::filesystem::path& output_dir) {
  std::vector<CompareRow> rows;
  auto row_for = [&](long width, const std::optional<double>& beta) -> CompareRow& {
    for (auto& r : rows)
      if (r.width == width && r.beta == beta) return r;
    CompareRow row;
    row.width = width;
    row.beta = beta;
    rows.push_back(row);
    return rows.back();
  };
  std::vector<std::vector<double>> hb, nag;

  for (const auto& run : manifest.runs) {
    CompareRow& row = row_for(run.width, run.beta);
    const std::size_t idx = static_cast<std::size_t>(&row - rows.data());
    hb.resize(rows.size());
    nag.resize(rows.size());
    if (run.method == Method::GD) continue;
    double steps = std::numeric_limits<double>::infinity();
    if (run.status == RunStatus::OK) {
      const long k = steps_to_threshold(read_trajectory_csv(output_dir / run.csv), kThresholdFraction);
      if (k >= 0) steps = static_cast<double>(k);
    }
    if (run.method == Method::HB) {
      ++row.runs_hb;
      hb[idx].push_back(steps);
    } else {
      ++row.runs_nag;
      nag[idx].push_back(steps);
    }
  }

  for (std::size_t i = 0; i < rows.size(); ++i) {
    CompareRow& row = rows[i];
    if (!hb[i].empty()) row.median_hb = median(hb[i]);
    if (!nag[i].empty()) row.median_nag = median(nag[i]);
    if (row.median_hb && row.median_nag) {
      const double h = *row.median_hb, n = *row.median_nag;
      if (std::isfinite(h) && std::isfinite(n) && h > 0.0) row.ratio = n / h;
      if (std::isfinite(h) || std::isfinite(n)) row.nag_le_hb = n <= h;
    }
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = csv_row({"width", "beta", "runs_hb", "runs_nag", "median_steps_hb",
                             "median_steps_nag", "ratio", "nag_le_hb"});
  for (const auto& r : rows) {
    out += csv_row({std::to_string(r.width), show(r.beta), std::to_string(r.runs_hb),
                    std::to_string(r.runs_nag), show(r.median_hb), show(r.median_nag),
                    show(r.ratio), show_flag(r.nag_le_hb)});
  }
  return out;
}

std::string compare_text(const std::vector<CompareRow>& rows) {
  char line[256];
  std::snprintf(line, sizeof line, "%8s %8s %6s %6s %12s %12s %8s %10s\n", "width", "beta", "#hb",
                "#nag", "median_hb", "median_nag", "ratio", "nag<=hb");
  std::string out = line;
  auto cell = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
  for (const auto& r : rows) {
    std::string ratio;
    if (r.ratio) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", *r.ratio);
      ratio = buf;
    }
    std::snprintf(line, sizeof line, "%8ld %8s %6d %6d %12s %12s %8s %10s\n", r.width,
                  cell(show(r.beta)).c_str(), r.runs_hb, r.runs_nag, cell(show(r.median_hb)).c_str(),
                  cell(show(r.median_nag)).c_str(), cell(ratio).c_str(),
                  cell(show_flag(r.nag_le_hb)).c_str());
    out += line;
  }
  out += "steps to reach loss <= 1e-2 * initial loss; inf marks censored runs\n";
  return out;
}

}  // namespace mntk
