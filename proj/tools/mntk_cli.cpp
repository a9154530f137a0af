#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mntk/config.hpp"
#include "mntk/errors.hpp"
#include "mntk/experiment.hpp"
#include "mntk/kernel.hpp"
#include "mntk/output.hpp"
#include "mntk/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mntk;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kDivergence = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> out;
  std::optional<std::string> lambda0;
  unsigned workers = 0;
};

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

ExperimentConfig load(const Options& o, bool seed_is_data_seed = false) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) {
    if (seed_is_data_seed) {
      cfg.dataset.seed = *o.seed;
    } else {
      cfg.seeds = {*o.seed};
    }
  }
  if (o.method) cfg.methods = {parse_method(*o.method)};
  if (o.out) cfg.output_dir = fs::absolute(*o.out).string();
  if (o.lambda0) {
    if (*o.lambda0 == "closed") {
      cfg.lambda0_source = Lambda0Source::CLOSED;
    } else if (*o.lambda0 == "empirical") {
      cfg.lambda0_source = Lambda0Source::EMPIRICAL;
    } else {
      throw ConfigError("--lambda0 must be 'closed' or 'empirical'");
    }
  }
  validate(cfg);
  return cfg;
}

double eta_for(const ExperimentConfig& cfg, const SpectrumReport& sp) {
  switch (cfg.eta_rule) {
    case EtaRule::LAMBDA_M_OVER_10: return sp.lambda_m / 10.0;
    case EtaRule::LAMBDA_M_OVER_20: return sp.lambda_m / 20.0;
    case EtaRule::FIXED: return *cfg.eta;
  }
  return 0.0;
}

int cmd_data_gen(const Options& o) {
  const ExperimentConfig cfg = load(o, true);
  const Dataset<double> data = make_dataset(cfg, warn);
  std::string csv;
  std::vector<std::string> header{"label"};
  for (Eigen::Index j = 0; j < data.X.cols(); ++j) header.push_back("x" + std::to_string(j));
  csv += csv_row(header);
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    std::vector<std::string> row{format_number(data.y(i))};
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) row.push_back(format_number(data.X(i, j)));
    csv += csv_row(row);
  }
  const fs::path path = cfg.output_path() / "dataset.csv";
  write_atomic(path, csv);
  std::printf("wrote %s (n = %ld, d = %ld)\n", path.string().c_str(), static_cast<long>(data.X.rows()),
              static_cast<long>(data.X.cols()));
  return kOk;
}

int cmd_spectrum(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const Dataset<double> data = make_dataset(cfg, warn);
  const GramMatrix<double> Hinf = ntk_limit_closed(data.X);
  const SpectrumReport sp = spectrum_report(Hinf);
  json doc = {{"n", data.X.rows()},
              {"d", data.X.cols()},
              {"limit_kernel",
               {{"lambda0", sp.lambda0},
                {"lambda_max", Hinf.lambda_max},
                {"lambda_m", sp.lambda_m},
                {"s_max", sp.s_max},
                {"kappa", sp.kappa()}}},
              {"eta", {{"lambda_m/10", sp.lambda_m / 10.0}, {"lambda_m/20", sp.lambda_m / 20.0}}},
              {"initial_kernels", json::array()}};
  std::printf("n = %ld, d = %ld\nlimit kernel: lambda0 = %.6g, lambda_m = %.6g, s_max = %.6g\n",
              static_cast<long>(data.X.rows()), static_cast<long>(data.X.cols()), sp.lambda0,
              sp.lambda_m, sp.s_max);
  const std::uint64_t seed = cfg.seeds.front();
  for (long m : cfg.widths) {
    Rng rng(seed);
    const auto net0 = init_network<double>(m, data.X.cols(), rng);
    const GramMatrix<double> H0 = gram_at(net0, data.X);
    const double gap = symmetric_norm2(Eigen::MatrixXd(H0.H - Hinf.H));
    doc["initial_kernels"].push_back({{"width", m},
                                      {"seed", seed},
                                      {"lambda_min", H0.lambda_min},
                                      {"lambda_max", H0.lambda_max},
                                      {"distance_to_limit", gap}});
    std::printf("m = %ld, seed %llu: lambda_min(H(0)) = %.6g, |H(0) - H_inf|_2 = %.4g\n", m,
                static_cast<unsigned long long>(seed), H0.lambda_min, gap);
  }
  write_atomic(cfg.output_path() / "spectrum.json", doc.dump(2) + "\n");
  return kOk;
}

int cmd_theory(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const Dataset<double> data = make_dataset(cfg, warn);
  const SpectrumReport sp = spectrum_report(ntk_limit_closed(data.X));
  const double eta = eta_for(cfg, sp);
  const long n = data.X.rows();
  const RateBundle ref = make_rate_bundle(sp.lambda0, eta, 0.0, sp.s_max);
  if (ref.s_clamped) {
    warn("eta = " + format_number(eta) + " exceeds 2/lambda_m; rates use s = " + format_number(ref.s));
  }
  json doc = {
      {"lambda0", sp.lambda0},
      {"lambda_m", sp.lambda_m},
      {"eta", eta},
      {"s", ref.s},
      {"s_clamped", ref.s_clamped},
      {"alpha", ref.alpha},
      {"rho_hb", ref.rho_hb},
      {"rho_nag", ref.rho_nag},
      {"rho_nag_alpha_squared_form", rho_nag(ref.alpha, Discriminant::AlphaSquared)},
      {"maxmin_hb", maxmin_rate_solver(RateProblem::HB)},
      {"maxmin_nag", maxmin_rate_solver(RateProblem::NAG, ref.alpha)},
      {"maxmin_nag_no_correction", maxmin_rate_solver(RateProblem::NAG_NO_CORRECTION, ref.alpha)},
      {"width_requirement", width_requirement(n, sp.lambda0, cfg.delta)},
      {"stability_radius", kernel_stability_radius(cfg.delta, sp.lambda0, n)},
      {"widths", json::array()}};
  std::printf("lambda0 = %.6g, s = %.6g%s, alpha = %.6g\n", sp.lambda0, ref.s,
              ref.s_clamped ? " (clamped)" : "", ref.alpha);
  std::printf("rho_hb = %.10f, rho_nag = %.10f\n", ref.rho_hb, ref.rho_nag);
  std::printf("advisory width requirement (delta = %g): %.4g\n", cfg.delta,
              width_requirement(n, sp.lambda0, cfg.delta));

  const std::uint64_t seed = cfg.seeds.front();
  for (long m : cfg.widths) {
    Rng rng(seed);
    const auto net0 = init_network<double>(m, data.X.cols(), rng);
    const GramMatrix<double> H0 = gram_at(net0, data.X);
    const Eigen::VectorXd delta0 = forward(net0, data.X) - data.y;
    const double l0 = cfg.lambda0_source == Lambda0Source::CLOSED ? sp.lambda0 : H0.lambda_min;
    const double L_hat0 = delta0.dot(H0.H * delta0) / 2.0;
    const RateBundle b = make_rate_bundle(l0, eta, L_hat0, sp.s_max);
    json curve = json::array();
    for (double t : {0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0}) {
      curve.push_back({{"t", t},
                       {"hb", bound_curve(Method::HB, b, t)},
                       {"nag", bound_curve(Method::NAG, b, t)}});
    }
    doc["widths"].push_back({{"width", m},
                             {"seed", seed},
                             {"lambda0", l0},
                             {"L_hat0", L_hat0},
                             {"prefactor_hb", b.prefactor_hb},
                             {"prefactor_nag", b.prefactor_nag},
                             {"radius_hb", radius_bounds(Method::HB, L_hat0, n, l0, m)},
                             {"radius_nag", radius_bounds(Method::NAG, L_hat0, n, l0, m)},
                             {"bound_curve", curve}});
    std::printf("m = %ld: L_hat(0) = %.6g, radius HB = %.4g, radius NAG = %.4g\n", m, L_hat0,
                radius_bounds(Method::HB, L_hat0, n, l0, m), radius_bounds(Method::NAG, L_hat0, n, l0, m));
  }
  write_atomic(cfg.output_path() / "theory.json", doc.dump(2) + "\n");
  return kOk;
}

int write_compare(const RunManifest& manifest, const fs::path& dir) {
  const auto rows = compare_report(manifest, dir);
  write_atomic(dir / "compare.csv", compare_csv(rows));
  const std::string text = compare_text(rows);
  write_atomic(dir / "compare.txt", text);
  std::fputs(text.c_str(), stdout);
  return kOk;
}

int cmd_run(const Options& o, RunMode mode) {
  ExperimentConfig cfg = load(o);
  cfg.mode = mode;
  validate(cfg);
  RunOptions opts;
  opts.workers = o.workers;
  opts.warn = warn;
  const RunManifest manifest = run_experiment(cfg, opts);
  const fs::path dir = cfg.output_path();
  std::printf("config %s: %zu runs written to %s\n", manifest.config_hash.c_str(),
              manifest.runs.size(), dir.string().c_str());
  write_compare(manifest, dir);
  if (manifest.any_diverged()) {
    for (const auto& r : manifest.runs)
      if (r.status == RunStatus::DIVERGED) std::cerr << "diverged: " << r.csv << ": " << r.message << "\n";
    return kDivergence;
  }
  return kOk;
}

RunManifest load_existing(const ExperimentConfig& cfg) {
  const fs::path path = cfg.output_path() / "manifest.json";
  RunManifest manifest = load_manifest(path);
  if (manifest.config_hash != config_hash(cfg)) {
    warn("manifest config hash " + manifest.config_hash + " differs from the current config " +
         config_hash(cfg));
  }
  return manifest;
}

int cmd_compare(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const RunManifest manifest = load_existing(cfg);
  write_compare(manifest, cfg.output_path());
  return manifest.any_diverged() ? kDivergence : kOk;
}

int cmd_report(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const RunManifest manifest = load_existing(cfg);
  const fs::path dir = cfg.output_path();
  render_plots(manifest, dir);
  std::printf("config %s, mode %s, n = %ld, d = %ld\n", manifest.config_hash.c_str(),
              to_string(manifest.mode).c_str(), manifest.n, manifest.d);
  std::printf("lambda0 = %.6g, lambda_m = %.6g, eta = %.6g, s = %.6g%s\n", manifest.spectrum.lambda0,
              manifest.spectrum.lambda_m, manifest.eta, manifest.s, manifest.s_clamped ? " (clamped)" : "");
  for (const auto& r : manifest.runs) {
    std::printf("  %-40s %-8s loss %.4g -> %.4g\n", r.csv.c_str(),
                r.status == RunStatus::OK ? "ok" : "diverged", r.initial_loss, r.final_loss);
  }
  for (const auto& p : manifest.plots) std::printf("  plot %s\n", p.svg.c_str());
  for (const auto& w : manifest.warnings) std::printf("  warning: %s\n", w.c_str());
  write_compare(manifest, dir);
  return manifest.any_diverged() ? kDivergence : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Momentum methods on wide two-layer ReLU networks"};
  app.require_subcommand(1);
  Options o;

  struct Spec {
    const char* name;
    const char* help;
    bool seed, method, lambda0, workers;
  };
  const Spec specs[] = {
      {"data-gen", "generate or load the dataset and write it as CSV", true, false, false, false},
      {"spectrum", "spectrum of the limit kernel and of H(0) per width", true, false, false, false},
      {"train", "discrete HB/NAG/GD runs over the configured grid", true, true, true, true},
      {"integrate", "ODE runs over the configured grid", true, true, true, true},
      {"theory", "rate constants, bound prefactors and radii", true, true, true, false},
      {"compare", "steps-to-threshold summary from an existing manifest", false, false, false, false},
      {"report", "redraw plots and summarize an existing manifest", false, false, false, false},
  };
  for (const auto& s : specs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", o.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides output_dir)");
    if (s.seed) sub->add_option("--seed", o.seed, "seed override");
    if (s.method) sub->add_option("--method", o.method, "gd, hb or nag");
    if (s.lambda0) sub->add_option("--lambda0", o.lambda0, "closed or empirical");
    if (s.workers) sub->add_option("--workers", o.workers, "parallel runs (0: all cores)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "data-gen") return cmd_data_gen(o);
    if (cmd == "spectrum") return cmd_spectrum(o);
    if (cmd == "train") return cmd_run(o, RunMode::DISCRETE);
    if (cmd == "integrate") return cmd_run(o, RunMode::ODE);
    if (cmd == "theory") return cmd_theory(o);
    if (cmd == "compare") return cmd_compare(o);
    if (cmd == "report") return cmd_report(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kData;
  } catch (const DegenerateData& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const GenerationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
