#include "mntk/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "mntk/dynamics.hpp"
#include "mntk/errors.hpp"
#include "mntk/optimizers.hpp"
#include "mntk/output.hpp"

namespace mntk {
namespace {

using nlohmann::json;

struct Job {
  long width;
  std::optional<double> beta;
  std::uint64_t seed;
  Method method;
};

struct JobOutput {
  RunEntry entry;
  double seconds = 0.0;
  std::exception_ptr error;
};

std::string beta_tag(const std::optional<double>& beta) {
  return beta ? "_b" + format_number(*beta) : std::string();
}

std::string run_file(const Job& job) {
  return "runs/m" + std::to_string(job.width) + beta_tag(job.beta) + "_s" +
         std::to_string(job.seed) + "_" + method_name(job.method) + ".csv";
}

std::string plot_file(long width, const std::optional<double>& beta) {
  return "plots/m" + std::to_string(width) + beta_tag(beta) + ".svg";
}

OdeSystem system_for(Method m) {
  switch (m) {
    case Method::GD: return OdeSystem::GF_RESIDUAL;
    case Method::HB: return OdeSystem::HB_HIGHRES;
    case Method::NAG: return OdeSystem::NAG_HIGHRES;
  }
  return OdeSystem::HB_HIGHRES;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

const char* status_name(RunStatus s) { return s == RunStatus::OK ? "ok" : "diverged"; }

struct Shared {
  const ExperimentConfig& cfg;
  const Dataset<double>& data;
  const SpectrumReport& spectrum;
  double eta;
  std::filesystem::path out_dir;
};

JobOutput execute(const Shared& ctx, const Job& job) {
  JobOutput result;
  RunEntry& e = result.entry;
  e.width = job.width;
  e.beta = job.beta;
  e.seed = job.seed;
  e.method = job.method;
  e.csv = run_file(job);

  const auto started = std::chrono::steady_clock::now();
  Rng rng(job.seed);
  const NetworkState<double> net0 = init_network<double>(job.width, ctx.data.X.cols(), rng);
  const GramMatrix<double> H0 = gram_at(net0, ctx.data.X);
  const Eigen::VectorXd delta0 = forward(net0, ctx.data.X) - ctx.data.y;

  e.lambda0 = ctx.cfg.lambda0_source == Lambda0Source::CLOSED ? ctx.spectrum.lambda0 : H0.lambda_min;
  if (!(e.lambda0 > 0.0)) {
    throw DegenerateData("lambda_min(H(0)) = " + format_number(e.lambda0) + " at width " +
                         std::to_string(job.width) + "; use a larger width or lambda0_source closed");
  }
  e.L_hat0 = delta0.dot(H0.H * delta0) / 2.0;
  const RateBundle bundle = make_rate_bundle(e.lambda0, ctx.eta, e.L_hat0, ctx.spectrum.s_max);
  const long n = ctx.data.X.rows();
  e.radius = radius_bounds(job.method == Method::NAG ? Method::NAG : Method::HB, e.L_hat0, n,
                           e.lambda0, job.width);

  Trajectory records;
  try {
    if (ctx.cfg.mode == RunMode::DISCRETE) {
      OptimizerConfig oc;
      oc.method = job.method;
      oc.eta = ctx.eta;
      oc.beta = job.beta.value_or(0.0);
      oc.max_iters = ctx.cfg.max_iters;
      oc.record_every = ctx.cfg.record_every;
      records = train(net0, ctx.data, oc);
    } else {
      DynamicsConfig dc;
      dc.system = system_for(job.method);
      dc.kernel_mode = ctx.cfg.ode.kernel_mode;
      dc.s = bundle.s;
      dc.lambda0 = e.lambda0;
      dc.b = std::sqrt(2.0 * e.lambda0);
      dc.h = ctx.cfg.ode.h;
      dc.t_end = ctx.cfg.ode.t_end;
      dc.record_every = ctx.cfg.ode.record_every;
      dc.lambda_m = ctx.spectrum.lambda_m;
      records = integrate_dynamics(net0, ctx.data, dc).records;
    }
  } catch (const DivergenceError& err) {
    e.status = RunStatus::DIVERGED;
    e.message = err.what();
    records = err.partial();
  }

  for (auto& r : records) {
    if (job.method != Method::GD) r.bound = bound_curve(job.method, bundle, r.t);
    if (r.lambda_min_H < e.lambda0 / 2.0) ++e.lambda_min_violations;
    if (r.max_displacement > e.radius) ++e.displacement_violations;
  }
  e.initial_loss = delta0.squaredNorm() / 2.0;
  if (!records.empty()) {
    e.final_loss = records.back().loss;
    e.final_step = records.back().step;
  }
  if (e.status == RunStatus::OK) e.steps_to_threshold = steps_to_threshold(records, kThresholdFraction);

  write_atomic(ctx.out_dir / e.csv, trajectory_csv(records));
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::vector<Job> make_grid(const ExperimentConfig& cfg) {
  std::vector<std::optional<double>> betas;
  if (cfg.mode == RunMode::DISCRETE) {
    betas.assign(cfg.betas.begin(), cfg.betas.end());
  } else {
    betas.push_back(std::nullopt);
  }
  std::vector<Job> jobs;
  for (long m : cfg.widths)
    for (const auto& b : betas)
      for (std::uint64_t seed : cfg.seeds)
        for (Method method : cfg.methods) jobs.push_back({m, b, seed, method});
  return jobs;
}

}  // namespace

bool RunManifest::any_diverged() const {
  for (const auto& r : runs)
    if (r.status == RunStatus::DIVERGED) return true;
  return false;
}

json to_json(const RunManifest& m) {
  json runs = json::array();
  for (const auto& r : m.runs) {
    runs.push_back({{"width", r.width},
                    {"beta", optional_json(r.beta)},
                    {"seed", r.seed},
                    {"method", method_name(r.method)},
                    {"csv", r.csv},
                    {"status", status_name(r.status)},
                    {"message", r.message},
                    {"lambda0", r.lambda0},
                    {"L_hat0", r.L_hat0},
                    {"initial_loss", r.initial_loss},
                    {"final_loss", r.final_loss},
                    {"final_step", r.final_step},
                    {"steps_to_threshold", r.steps_to_threshold},
                    {"radius", r.radius},
                    {"lambda_min_violations", r.lambda_min_violations},
                    {"displacement_violations", r.displacement_violations}});
  }
  json plots = json::array();
  for (const auto& p : m.plots) {
    plots.push_back({{"width", p.width}, {"beta", optional_json(p.beta)}, {"svg", p.svg}});
  }
  return {{"config_hash", m.config_hash},
          {"config", m.config},
          {"mode", to_string(m.mode)},
          {"dataset", {{"n", m.n}, {"d", m.d}}},
          {"spectrum",
           {{"lambda0", m.spectrum.lambda0},
            {"lambda_m", m.spectrum.lambda_m},
            {"s_max", m.spectrum.s_max},
            {"kappa", m.spectrum.kappa()}}},
          {"step",
           {{"eta", m.eta},
            {"s", m.s},
            {"s_clamped", m.s_clamped},
            {"mapping", "s = eta, t = step * sqrt(eta)"}}},
          {"rates", {{"alpha", m.alpha}, {"rho_hb", m.rho_hb}, {"rho_nag", m.rho_nag}}},
          {"advisory",
           {{"width_requirement", m.width_requirement},
            {"stability_radius", m.stability_radius}}},
          {"runs", runs},
          {"plots", plots},
          {"warnings", m.warnings}};
}

RunManifest manifest_from_json(const json& doc) {
  try {
    RunManifest m;
    m.config_hash = doc.at("config_hash").get<std::string>();
    m.config = doc.at("config");
    m.mode = doc.at("mode").get<std::string>() == "ode" ? RunMode::ODE : RunMode::DISCRETE;
    m.n = doc.at("dataset").at("n").get<long>();
    m.d = doc.at("dataset").at("d").get<long>();
    const json& sp = doc.at("spectrum");
    m.spectrum = {sp.at("lambda0").get<double>(), sp.at("lambda_m").get<double>(),
                  sp.at("s_max").get<double>()};
    m.eta = doc.at("step").at("eta").get<double>();
    m.s = doc.at("step").at("s").get<double>();
    m.s_clamped = doc.at("step").at("s_clamped").get<bool>();
    m.alpha = doc.at("rates").at("alpha").get<double>();
    m.rho_hb = doc.at("rates").at("rho_hb").get<double>();
    m.rho_nag = doc.at("rates").at("rho_nag").get<double>();
    m.width_requirement = doc.at("advisory").at("width_requirement").get<double>();
    m.stability_radius = doc.at("advisory").at("stability_radius").get<double>();
    for (const json& r : doc.at("runs")) {
      RunEntry e;
      e.width = r.at("width").get<long>();
      e.beta = optional_from(r.at("beta"));
      e.seed = r.at("seed").get<std::uint64_t>();
      e.method = parse_method(r.at("method").get<std::string>());
      e.csv = r.at("csv").get<std::string>();
      e.status = r.at("status").get<std::string>() == "ok" ? RunStatus::OK : RunStatus::DIVERGED;
      e.message = r.at("message").get<std::string>();
      e.lambda0 = r.at("lambda0").get<double>();
      e.L_hat0 = r.at("L_hat0").get<double>();
      e.initial_loss = r.at("initial_loss").get<double>();
      e.final_loss = r.at("final_loss").get<double>();
      e.final_step = r.at("final_step").get<long>();
      e.steps_to_threshold = r.at("steps_to_threshold").get<long>();
      e.radius = r.at("radius").get<double>();
      e.lambda_min_violations = r.at("lambda_min_violations").get<long>();
      e.displacement_violations = r.at("displacement_violations").get<long>();
      m.runs.push_back(std::move(e));
    }
    for (const json& p : doc.at("plots")) {
      m.plots.push_back({p.at("width").get<long>(), optional_from(p.at("beta")),
                         p.at("svg").get<std::string>()});
    }
    m.warnings = doc.at("warnings").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what(), 0);
  }
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string(), 0);
  try {
    return manifest_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts,
                           std::vector<RunTiming>* timings) {
  validate(cfg);
  const auto started = std::chrono::steady_clock::now();
  RunManifest manifest;
  auto warn = [&](const std::string& msg) {
    manifest.warnings.push_back(msg);
    if (opts.warn) opts.warn(msg);
  };

  const Dataset<double> data = make_dataset(cfg, warn);
  const SpectrumReport spectrum = spectrum_report(ntk_limit_closed(data.X));
  double eta = 0.0;
  switch (cfg.eta_rule) {
    case EtaRule::LAMBDA_M_OVER_10: eta = spectrum.lambda_m / 10.0; break;
    case EtaRule::LAMBDA_M_OVER_20: eta = spectrum.lambda_m / 20.0; break;
    case EtaRule::FIXED: eta = *cfg.eta; break;
  }
  const RateBundle reference = make_rate_bundle(spectrum.lambda0, eta, 0.0, spectrum.s_max);
  if (reference.s_clamped) {
    warn("eta = " + format_number(eta) + " exceeds 2/lambda_m = " + format_number(spectrum.s_max) +
         "; bounds and ODE runs use s = " + format_number(reference.s));
  }

  manifest.config_hash = config_hash(cfg);
  manifest.config = to_json(cfg);
  manifest.mode = cfg.mode;
  manifest.n = data.X.rows();
  manifest.d = data.X.cols();
  manifest.spectrum = spectrum;
  manifest.eta = eta;
  manifest.s = reference.s;
  manifest.s_clamped = reference.s_clamped;
  manifest.alpha = reference.alpha;
  manifest.rho_hb = reference.rho_hb;
  manifest.rho_nag = reference.rho_nag;
  manifest.width_requirement = width_requirement(manifest.n, spectrum.lambda0, cfg.delta);
  manifest.stability_radius = kernel_stability_radius(cfg.delta, spectrum.lambda0, manifest.n);

  const std::filesystem::path out_dir = cfg.output_path();
  const Shared ctx{cfg, data, spectrum, eta, out_dir};
  const std::vector<Job> jobs = make_grid(cfg);
  std::vector<JobOutput> outputs(jobs.size());

  unsigned workers = opts.workers ? opts.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, jobs.size()));
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
          try {
            outputs[i] = execute(ctx, jobs[i]);
          } catch (...) {
            outputs[i].error = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& o : outputs)
    if (o.error) std::rethrow_exception(o.error);

  std::vector<RunTiming> local;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (outputs[i].entry.lambda_min_violations > 0) {
      warn(outputs[i].entry.csv + ": lambda_min(H) fell below lambda0/2 at " +
           std::to_string(outputs[i].entry.lambda_min_violations) + " recorded points");
    }
    if (outputs[i].entry.displacement_violations > 0) {
      warn(outputs[i].entry.csv + ": max displacement exceeded the radius bound at " +
           std::to_string(outputs[i].entry.displacement_violations) + " recorded points");
    }
    local.push_back({outputs[i].entry.csv, outputs[i].seconds});
    manifest.runs.push_back(std::move(outputs[i].entry));
  }

  for (const auto& job : jobs) {
    const bool seen = std::any_of(manifest.plots.begin(), manifest.plots.end(), [&](const CellPlot& p) {
      return p.width == job.width && p.beta == job.beta;
    });
    if (!seen) manifest.plots.push_back({job.width, job.beta, plot_file(job.width, job.beta)});
  }
  render_plots(manifest, out_dir);
  write_atomic(out_dir / "manifest.json", to_json(manifest).dump(2) + "\n");

  json timing_doc = {{"runs", json::array()}};
  for (const auto& t : local) timing_doc["runs"].push_back({{"csv", t.csv}, {"seconds", t.seconds}});
  timing_doc["total_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_atomic(out_dir / "timings.json", timing_doc.dump(2) + "\n");
  if (timings) *timings = std::move(local);
  return manifest;
}

void render_plots(const RunManifest& manifest, const std::filesystem::path& output_dir) {
  struct Style {
    Method method;
    const char* name;
    const char* color;
  };
  const Style styles[] = {{Method::GD, "GD", "#2ca02c"},
                          {Method::HB, "HB", "#1f77b4"},
                          {Method::NAG, "NAG", "#d62728"}};
  const bool ode = manifest.mode == RunMode::ODE;

  for (const auto& plot : manifest.plots) {
    std::vector<SvgSeries> series;
    for (const auto& style : styles) {
      std::vector<Trajectory> runs;
      for (const auto& r : manifest.runs) {
        if (r.width == plot.width && r.beta == plot.beta && r.method == style.method) {
          runs.push_back(read_trajectory_csv(output_dir / r.csv));
        }
      }
      if (runs.empty()) continue;
      std::size_t common = runs.front().size();
      for (const auto& t : runs) {
        common = std::min(common, t.size());
        SvgSeries s{style.name, style.color, {}, {}, false, 1.0, 0.3, false};
        for (const auto& rec : t) {
          s.x.push_back(ode ? rec.t : static_cast<double>(rec.step));
          s.y.push_back(rec.loss);
        }
        series.push_back(std::move(s));
      }
      SvgSeries mean{std::string(style.name) + " mean loss", style.color, {}, {}, true, 2.2};
      SvgSeries bound{std::string(style.name) + " bound", style.color, {}, {}, false, 1.2, 0.8};
      for (std::size_t i = 0; i < common; ++i) {
        double loss = 0.0, b = 0.0;
        bool has_bound = true;
        for (const auto& t : runs) {
          loss += t[i].loss;
          if (t[i].bound) {
            b += *t[i].bound;
          } else {
            has_bound = false;
          }
        }
        const double x = ode ? runs.front()[i].t : static_cast<double>(runs.front()[i].step);
        mean.x.push_back(x);
        mean.y.push_back(loss / static_cast<double>(runs.size()));
        if (has_bound) {
          bound.x.push_back(x);
          bound.y.push_back(b / static_cast<double>(runs.size()));
        }
      }
      series.push_back(std::move(mean));
      if (!bound.x.empty()) series.push_back(std::move(bound));
    }
    std::string title = "m = " + std::to_string(plot.width);
    if (plot.beta) title += ", beta = " + format_number(*plot.beta);
    write_atomic(output_dir / plot.svg,
                 svg_line_chart(title, ode ? "t" : "iteration", "training loss", series));
  }
}

}  // namespace mntk
