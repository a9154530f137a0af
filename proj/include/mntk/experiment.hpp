#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mntk/config.hpp"
#include "mntk/kernel.hpp"
#include "mntk/theory.hpp"

namespace mntk {

enum class RunStatus { OK, DIVERGED };

struct RunEntry {
  long width = 0;
  std::optional<double> beta;  // unset in ODE mode
  std::uint64_t seed = 0;
  Method method = Method::HB;
  std::string csv;  // relative to the output directory
  RunStatus status = RunStatus::OK;
  std::string message;
  double lambda0 = 0.0;  // lambda0 used for this run's bound column
  double L_hat0 = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  long final_step = 0;
  long steps_to_threshold = -1;  // first step with loss <= 1e-2 loss(0), -1 if never
  double radius = 0.0;           // displacement bound for the method (HB form for GD)
  long lambda_min_violations = 0;   // records with lambda_min(H) < lambda0 / 2
  long displacement_violations = 0;  // records with max_displacement > radius
};

struct CellPlot {
  long width = 0;
  std::optional<double> beta;
  std::string svg;
};

struct RunManifest {
  std::string config_hash;
  nlohmann::json config;
  RunMode mode = RunMode::DISCRETE;
  long n = 0;
  long d = 0;
  SpectrumReport spectrum{};  // of the closed-form limit kernel
  double eta = 0.0;
  double s = 0.0;  // s used by bounds and ODE runs, after clamping to s_max
  bool s_clamped = false;
  double alpha = 0.0;
  double rho_hb = 0.0;
  double rho_nag = 0.0;
  double width_requirement = 0.0;  // advisory
  double stability_radius = 0.0;   // advisory, constant 1
  std::vector<RunEntry> runs;
  std::vector<CellPlot> plots;
  std::vector<std::string> warnings;

  bool any_diverged() const;
};

inline constexpr double kThresholdFraction = 1e-2;

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& doc);
RunManifest load_manifest(const std::filesystem::path& path);

struct RunOptions {
  unsigned workers = 0;  // 0: hardware concurrency
  WarningSink warn;
};

struct RunTiming {
  std::string csv;
  double seconds = 0.0;
};

/// Runs the (width, beta, seed, method) grid and writes one CSV per run,
/// one SVG per (width, beta) cell, manifest.json and timings.json into the
/// output directory. Diverged runs keep their partial CSV and are marked in
/// the manifest. Wall-clock times go to timings.json only, so manifest.json
/// is reproducible byte for byte.
RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {},
                           std::vector<RunTiming>* timings = nullptr);

/// Redraws the per-cell SVGs from the CSVs a manifest references.
void render_plots(const RunManifest& manifest, const std::filesystem::path& output_dir);

struct CompareRow {
  long width = 0;
  std::optional<double> beta;
  int runs_hb = 0;
  int runs_nag = 0;
  std::optional<double> median_hb;   // +inf when censored
  std::optional<double> median_nag;
  std::optional<double> ratio;       // NAG / HB
  std::optional<bool> nag_le_hb;
};

/// Median steps-to-threshold per cell, recomputed from the CSV files.
std::vector<CompareRow> compare_report(const RunManifest& manifest,
                                       const std::filesystem::path& output_dir);
std::string compare_csv(const std::vector<CompareRow>& rows);
std::string compare_text(const std::vector<CompareRow>& rows);

/// Median with +inf for censored values; the mean of the middle pair for even counts.
double median(std::vector<double> values);

}  // namespace mntk
