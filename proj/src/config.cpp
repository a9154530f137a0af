#include "mntk/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "mntk/errors.hpp"

namespace mntk {
namespace {

using nlohmann::json;

template <typename Enum, std::size_t N>
Enum parse_enum(const json& v, const char* key, const std::pair<const char*, Enum> (&names)[N]) {
  if (!v.is_string()) throw ConfigError(std::string(key) + ": expected a string");
  const auto text = v.get<std::string>();
  for (const auto& [name, value] : names)
    if (text == name) return value;
  std::string allowed;
  for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  throw ConfigError(std::string(key) + ": unknown value '" + text + "' (expected " + allowed + ")");
}

template <typename Enum, std::size_t N>
std::string enum_name(Enum e, const std::pair<const char*, Enum> (&names)[N]) {
  for (const auto& [name, value] : names)
    if (value == e) return name;
  return "?";
}

const std::pair<const char*, DatasetKind> kDatasetNames[] = {{"synthetic", DatasetKind::SYNTHETIC},
                                                             {"mnist2", DatasetKind::MNIST2},
                                                             {"fmnist2", DatasetKind::FMNIST2},
                                                             {"cifar2", DatasetKind::CIFAR2}};
const std::pair<const char*, EtaRule> kEtaNames[] = {{"lambda_m/10", EtaRule::LAMBDA_M_OVER_10},
                                                     {"lambda_m/20", EtaRule::LAMBDA_M_OVER_20},
                                                     {"fixed", EtaRule::FIXED}};
const std::pair<const char*, RunMode> kModeNames[] = {{"discrete", RunMode::DISCRETE},
                                                      {"ode", RunMode::ODE}};
const std::pair<const char*, Lambda0Source> kLambdaNames[] = {
    {"closed", Lambda0Source::CLOSED}, {"empirical", Lambda0Source::EMPIRICAL}};
const std::pair<const char*, KernelMode> kKernelNames[] = {{"frozen", KernelMode::FROZEN},
                                                           {"coupled", KernelMode::COUPLED}};
const std::pair<const char*, Method> kMethodNames[] = {
    {"gd", Method::GD}, {"hb", Method::HB}, {"nag", Method::NAG}};

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!keys.count(item.key())) {
      throw ConfigError(std::string(where) + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
T get_as(const json& obj, const char* key) {
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(std::string(key) + ": expected a string");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(std::string(key) + ": expected a number");
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) throw ConfigError(std::string(key) + ": expected an unsigned integer");
  } else {
    if (!v.is_number_integer()) throw ConfigError(std::string(key) + ": expected an integer");
  }
  return v.get<T>();
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = get_as<T>(obj, key);
}

template <typename T>
std::vector<T> read_list(const json& obj, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(std::string(key) + ": expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    json wrapper = {{key, v[i]}};
    out.push_back(get_as<T>(wrapper, key));
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::filesystem::path ExperimentConfig::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::string to_string(DatasetKind k) { return enum_name(k, kDatasetNames); }
std::string to_string(EtaRule r) { return enum_name(r, kEtaNames); }
std::string to_string(RunMode m) { return enum_name(m, kModeNames); }
std::string to_string(Lambda0Source s) { return enum_name(s, kLambdaNames); }
std::string method_name(Method m) { return enum_name(m, kMethodNames); }

Method parse_method(const std::string& name) {
  return parse_enum(json(name), "method", kMethodNames);
}

void validate(const ExperimentConfig& cfg) {
  const auto& ds = cfg.dataset;
  if (ds.n < 2) throw ConfigError("dataset.n must be >= 2");
  if (ds.kind == DatasetKind::SYNTHETIC) {
    if (ds.d < 2) throw ConfigError("dataset.d must be >= 2");
  } else {
    if (ds.images.empty()) throw ConfigError("dataset.images is required for real data");
    if (ds.kind != DatasetKind::CIFAR2 && ds.labels.empty()) {
      throw ConfigError("dataset.labels is required for IDX data");
    }
    if (ds.class_a == ds.class_b) throw ConfigError("dataset.class_a and class_b must differ");
    if (ds.class_a < 0 || ds.class_b < 0 || ds.class_a > 255 || ds.class_b > 255) {
      throw ConfigError("dataset classes must be in [0, 255]");
    }
  }
  if (cfg.widths.empty()) throw ConfigError("widths must be non-empty");
  for (long m : cfg.widths)
    if (m < 1) throw ConfigError("widths must all be >= 1");
  if (cfg.mode == RunMode::DISCRETE && cfg.betas.empty()) throw ConfigError("betas must be non-empty");
  for (double b : cfg.betas)
    if (!(b >= 0.0 && b < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (cfg.eta_rule == EtaRule::FIXED) {
    if (!cfg.eta || !(*cfg.eta > 0.0) || !std::isfinite(*cfg.eta)) {
      throw ConfigError("eta_rule 'fixed' needs a positive eta");
    }
  } else if (cfg.eta) {
    throw ConfigError("eta is only allowed with eta_rule 'fixed'");
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (cfg.methods.empty()) throw ConfigError("methods must be non-empty");
  if (cfg.max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (cfg.record_every < 1) throw ConfigError("record_every must be >= 1");
  if (!(cfg.ode.h > 0.0)) throw ConfigError("ode.h must be positive");
  if (!(cfg.ode.t_end >= 0.0)) throw ConfigError("ode.t_end must be >= 0");
  if (cfg.ode.record_every < 1) throw ConfigError("ode.record_every must be >= 1");
  if (cfg.mode == RunMode::ODE && cfg.ode.kernel_mode == KernelMode::COUPLED) {
    for (Method m : cfg.methods)
      if (m == Method::GD) throw ConfigError("coupled ODE mode does not support gd");
  }
  if (!(cfg.delta > 0.0 && cfg.delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must be non-empty");
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  try {
    check_keys(doc, "config",
               {"dataset", "widths", "betas", "eta_rule", "eta", "seeds", "methods", "max_iters",
                "record_every", "mode", "ode", "lambda0_source", "delta", "output_dir"});
    if (doc.contains("dataset")) {
      const json& ds = doc.at("dataset");
      check_keys(ds, "dataset", {"kind", "n", "d", "seed", "images", "labels", "class_a", "class_b"});
      if (ds.contains("kind")) cfg.dataset.kind = parse_enum(ds.at("kind"), "dataset.kind", kDatasetNames);
      if (cfg.dataset.kind != DatasetKind::SYNTHETIC) cfg.dataset.n = 200;
      read(ds, "n", cfg.dataset.n);
      read(ds, "d", cfg.dataset.d);
      read(ds, "seed", cfg.dataset.seed);
      read(ds, "images", cfg.dataset.images);
      read(ds, "labels", cfg.dataset.labels);
      read(ds, "class_a", cfg.dataset.class_a);
      read(ds, "class_b", cfg.dataset.class_b);
    }
    if (doc.contains("widths")) cfg.widths = read_list<long>(doc, "widths");
    if (doc.contains("betas")) cfg.betas = read_list<double>(doc, "betas");
    if (doc.contains("eta_rule")) cfg.eta_rule = parse_enum(doc.at("eta_rule"), "eta_rule", kEtaNames);
    if (doc.contains("eta")) cfg.eta = get_as<double>(doc, "eta");
    if (doc.contains("seeds")) cfg.seeds = read_list<std::uint64_t>(doc, "seeds");
    if (doc.contains("methods")) {
      cfg.methods.clear();
      for (const auto& name : read_list<std::string>(doc, "methods")) cfg.methods.push_back(parse_method(name));
    }
    read(doc, "max_iters", cfg.max_iters);
    read(doc, "record_every", cfg.record_every);
    if (doc.contains("mode")) cfg.mode = parse_enum(doc.at("mode"), "mode", kModeNames);
    if (doc.contains("ode")) {
      const json& ode = doc.at("ode");
      check_keys(ode, "ode", {"kernel_mode", "h", "t_end", "record_every"});
      if (ode.contains("kernel_mode")) {
        cfg.ode.kernel_mode = parse_enum(ode.at("kernel_mode"), "ode.kernel_mode", kKernelNames);
      }
      read(ode, "h", cfg.ode.h);
      read(ode, "t_end", cfg.ode.t_end);
      read(ode, "record_every", cfg.ode.record_every);
    }
    if (doc.contains("lambda0_source")) {
      cfg.lambda0_source = parse_enum(doc.at("lambda0_source"), "lambda0_source", kLambdaNames);
    }
    read(doc, "delta", cfg.delta);
    read(doc, "output_dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  const auto parent = path.parent_path();
  return parse_config(doc, parent.empty() ? std::filesystem::path(".") : parent);
}

json to_json(const ExperimentConfig& cfg) {
  json ds = {{"kind", to_string(cfg.dataset.kind)}, {"n", cfg.dataset.n}};
  if (cfg.dataset.kind == DatasetKind::SYNTHETIC) {
    ds["d"] = cfg.dataset.d;
    ds["seed"] = cfg.dataset.seed;
  } else {
    ds["images"] = cfg.dataset.images;
    ds["labels"] = cfg.dataset.labels;
    ds["class_a"] = cfg.dataset.class_a;
    ds["class_b"] = cfg.dataset.class_b;
  }
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(method_name(m));
  json doc = {
      {"dataset", ds},
      {"widths", cfg.widths},
      {"betas", cfg.betas},
      {"eta_rule", to_string(cfg.eta_rule)},
      {"seeds", cfg.seeds},
      {"methods", methods},
      {"max_iters", cfg.max_iters},
      {"record_every", cfg.record_every},
      {"mode", to_string(cfg.mode)},
      {"ode",
       {{"kernel_mode", enum_name(cfg.ode.kernel_mode, kKernelNames)},
        {"h", cfg.ode.h},
        {"t_end", cfg.ode.t_end},
        {"record_every", cfg.ode.record_every}}},
      {"lambda0_source", to_string(cfg.lambda0_source)},
      {"delta", cfg.delta},
      {"output_dir", cfg.output_dir},
  };
  if (cfg.eta) doc["eta"] = *cfg.eta;
  return doc;
}

std::string canonical_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(); }

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

Dataset<double> make_dataset(const ExperimentConfig& cfg, const WarningSink& warn) {
  const auto& ds = cfg.dataset;
  switch (ds.kind) {
    case DatasetKind::SYNTHETIC: {
      Rng rng(ds.seed);
      return gen_synthetic(ds.n, ds.d, rng);
    }
    case DatasetKind::MNIST2:
    case DatasetKind::FMNIST2:
      return load_binary_subset(BinaryFormat::IDX, cfg.resolve(ds.images), cfg.resolve(ds.labels),
                                ds.class_a, ds.class_b, ds.n, warn);
    case DatasetKind::CIFAR2:
      return load_binary_subset(BinaryFormat::CIFAR_BIN, cfg.resolve(ds.images), {}, ds.class_a,
                                ds.class_b, ds.n, warn);
  }
  throw ConfigError("unknown dataset kind");
}

}  // namespace mntk
