#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mntk/data.hpp"
#include "mntk/dynamics.hpp"
#include "mntk/theory.hpp"

namespace mntk {

enum class DatasetKind { SYNTHETIC, MNIST2, FMNIST2, CIFAR2 };
enum class EtaRule { LAMBDA_M_OVER_10, LAMBDA_M_OVER_20, FIXED };
enum class RunMode { DISCRETE, ODE };
enum class Lambda0Source { CLOSED, EMPIRICAL };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::SYNTHETIC;
  long n = 20;  // synthetic size, or the subset cap n_max for real data
  long d = 10;  // synthetic only
  std::uint64_t seed = 2024;  // synthetic only
  std::string images;  // as written in the config file
  std::string labels;
  int class_a = 0;
  int class_b = 1;
};

/// ODE-mode settings. The system follows from the method (GD -> gradient
/// flow, HB/NAG -> their high-resolution residual systems).
struct OdeSettings {
  KernelMode kernel_mode = KernelMode::FROZEN;
  double h = 0.01;
  double t_end = 10.0;
  long record_every = 10;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<long> widths{2000};
  std::vector<double> betas{0.97};
  EtaRule eta_rule = EtaRule::LAMBDA_M_OVER_10;
  std::optional<double> eta;  // required when eta_rule is FIXED
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<Method> methods{Method::HB, Method::NAG};
  long max_iters = 2000;
  long record_every = 10;
  RunMode mode = RunMode::DISCRETE;
  OdeSettings ode;
  Lambda0Source lambda0_source = Lambda0Source::CLOSED;
  double delta = 0.1;  // failure probability for the advisory width/radius report
  std::string output_dir = "out";
  /// Directory of the config file; relative paths resolve against it. Not
  /// part of the serialized config.
  std::filesystem::path base_dir = ".";

  std::filesystem::path resolve(const std::string& p) const;
  std::filesystem::path output_path() const { return resolve(output_dir); }
};

/// Throws ConfigError on invariant violations.
void validate(const ExperimentConfig& cfg);

/// Strict parse: unknown keys, wrong types and invalid values are ConfigErrors.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical form with every field explicit and keys sorted.
nlohmann::json to_json(const ExperimentConfig& cfg);
std::string canonical_config(const ExperimentConfig& cfg);
/// FNV-1a 64 of the canonical form, as 16 lowercase hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string to_string(DatasetKind k);
std::string to_string(EtaRule r);
std::string to_string(RunMode m);
std::string to_string(Lambda0Source s);
std::string method_name(Method m);  // "gd", "hb", "nag"
Method parse_method(const std::string& name);  // ConfigError on unknown names

/// Synthetic generation or the binary loader, as configured.
Dataset<double> make_dataset(const ExperimentConfig& cfg, const WarningSink& warn = {});

}  // namespace mntk
