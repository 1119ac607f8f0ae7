#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iostream>
#include <map>
#include <mutex>

#include "harness/experiment.hpp"
#include "harness/gradcheck_suite.hpp"
#include "knife/boost.hpp"
#include "knife/bounds.hpp"
#include "knife/conditional.hpp"
#include "knife/errors.hpp"
#include "knife/quadrature.hpp"
#include "knife/synth.hpp"

namespace knife::harness {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct SeedOutput {
  std::vector<ResultRow> rows;
  json extra = json::object();
};

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(Clock::now()) {}
  double ms() const {
    return enabled_ ? std::chrono::duration<double, std::milli>(Clock::now() - start_).count() : 0.0;
  }

 private:
  bool enabled_;
  Clock::time_point start_;
};

std::string series(const ExperimentConfig& cfg, std::string_view suffix) { return cfg.id + ":" + std::string(suffix); }

TrainConfig seeded(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.seed = seed;
  return t;
}

std::size_t support_size(const ExperimentConfig& cfg) {
  return cfg.support_size ? cfg.support_size : static_cast<std::size_t>(cfg.train.modes);
}

// Evaluation rows (one per epoch) and optional training-loss rows for one fit.
void emit_fit(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& name, const FitReport& fit,
              const std::function<std::optional<double>(std::size_t)>& oracle, double wall_ms, SeedOutput& out) {
  const std::size_t iters = cfg.train.iterations_per_epoch;
  for (std::size_t e = 0; e < fit.epoch_estimates.size(); ++e)
    out.rows.push_back({name, seed, e, (e + 1) * iters, fit.epoch_estimates[e], oracle(e), wall_ms});
  if (cfg.log_every == 0) return;
  for (std::size_t i = 0; i < fit.loss_trace.size(); i += cfg.log_every)
    out.rows.push_back({name + "/train", seed, i / iters, i, fit.loss_trace[i], oracle(i / iters), wall_ms});
}

// -int p log p of a fitted one-dimensional density, over a window wide
// enough to hold every component.
double quadrature_entropy_1d(const KnifeParams& theta) {
  const double lo = (theta.shifts().col(0).array() - 10.0 * (-theta.log_diag().col(0).array()).exp()).minCoeff();
  const double hi = (theta.shifts().col(0).array() + 10.0 * (-theta.log_diag().col(0).array()).exp()).maxCoeff();
  const KnifeEvaluator eval(theta.view());
  const auto pdf = [&](double x) { return std::exp(eval.log_density({&x, 1})); };
  // Split the window so adaptive refinement sees every narrow component.
  const int pieces = 64;
  double h = 0.0;
  for (int i = 0; i < pieces; ++i)
    h += entropy_integral(pdf, lo + (hi - lo) * i / pieces, lo + (hi - lo) * (i + 1) / pieces, 1e-9 / pieces);
  return h;
}

// ---------------------------------------------------------------------------
// Entropy experiments

SeedOutput run_gauss(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  const GaussianSpec spec{cfg.gaussian.dim, cfg.id == "gauss-shrink" ? cfg.gaussian.shrink : 1.0};
  spec.validate();
  Rng support_rng = make_rng(seed, 0);
  const SupportSet support{sample_gauss(spec, support_size(cfg), support_rng)};
  const Sampler source = gauss_sampler(spec);
  SeedOutput out;
  for (EstimatorMode mode : cfg.modes) {
    const Stopwatch clock(opts.timing);
    const FitReport fit = fit_entropy(source, support, mode, seeded(cfg, seed));
    emit_fit(cfg, seed, series(cfg, to_string(mode)), fit,
             [&](std::size_t e) { return gaussian_entropy(spec.dim, spec.variance(e)); }, clock.ms(), out);
  }
  return out;
}

TriangleMixtureSpec triangle_spec(const ExperimentConfig& cfg) {
  if (!cfg.triangle.weights.empty()) {
    TriangleMixtureSpec s{cfg.triangle.weights, cfg.triangle.scales, cfg.triangle.dim};
    s.validate();
    return s;
  }
  Rng rng = make_rng(cfg.triangle.spec_seed, 7);
  return random_triangle_spec(cfg.triangle.components, cfg.triangle.dim, rng);
}

SeedOutput run_triangle(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  const TriangleMixtureSpec spec = triangle_spec(cfg);
  const double oracle = oracle_entropy_triangle(spec);
  Rng support_rng = make_rng(seed, 0);
  const SupportSet support{sample_triangle_mixture(spec, support_size(cfg), support_rng)};
  const Sampler source = [spec](std::size_t, std::size_t n, Rng& rng) { return sample_triangle_mixture(spec, n, rng); };
  SeedOutput out;
  for (EstimatorMode mode : cfg.modes) {
    const Stopwatch clock(opts.timing);
    const FitReport fit = fit_entropy(source, support, mode, seeded(cfg, seed));
    const std::string name = series(cfg, to_string(mode));
    emit_fit(cfg, seed, name, fit, [&](std::size_t) { return oracle; }, clock.ms(), out);
    if (spec.dim == 1)
      out.rows.push_back({name + "/quadrature", seed, cfg.train.epochs - 1, cfg.train.epochs * cfg.train.iterations_per_epoch,
                          quadrature_entropy_1d(fit.final_params), oracle, clock.ms()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mutual information

SeedOutput run_mi(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  const MiSection& mi = cfg.mi;
  const bool uniform = cfg.id == "mi-uniform";
  const bool cubic = mi.cubic || cfg.id == "mi-cubic";
  std::vector<double> rhos;
  for (double t : mi.targets)
    rhos.push_back(uniform ? rho_for_target_mi_uniform(t, mi.dim) : rho_for_target_mi_gauss(t, mi.dim));
  const PairSampler source = [&](std::size_t epoch, std::size_t n, Rng& rng) {
    const double rho = rhos[std::min(epoch, rhos.size() - 1)];
    PairBatch b = uniform ? sample_uniform_pair(UniformPairSpec{rho, mi.dim}, n, rng)
                          : sample_correlated_gauss(mi.dim, rho, n, rng);
    if (cubic) b.y = b.y.array().cube().matrix();
    return b;
  };
  TrainConfig t = seeded(cfg, seed);
  t.epochs = mi.targets.size();

  Rng init_rng = make_rng(seed, 0);
  const PairBatch first = source(0, support_size(cfg), init_rng);
  const SupportSet support{first.x};
  const auto cond_modes = std::min<Eigen::Index>(mi.cond_modes, first.x.rows());
  ConditionerNet net(mi.dim, mi.hidden_width, static_cast<int>(cond_modes), mi.dim, t.covariance);
  net.init(init_rng, initial_params(SupportSet{first.x.topRows(cond_modes)}, EstimatorMode::knife, t.covariance));

  const Stopwatch clock(opts.timing);
  const MiReport rep = mi_estimate(source, support, net, t);
  const double wall = clock.ms();
  const double hx = uniform ? mi.dim * std::log(2.0 * std::sqrt(3.0)) : gaussian_entropy(mi.dim);
  SeedOutput out;
  const std::size_t iters = t.iterations_per_epoch;
  for (std::size_t e = 0; e < rep.epoch_estimates.size(); ++e) {
    const std::size_t it = (e + 1) * iters;
    out.rows.push_back({series(cfg, "knife"), seed, e, it, rep.epoch_estimates[e], mi.targets[e], wall});
    out.rows.push_back({series(cfg, "knife/marginal"), seed, e, it, rep.epoch_marginal[e], hx, wall});
    // H(X|Y) = H(X) - I, which the cubic map on Y leaves unchanged.
    out.rows.push_back({series(cfg, "knife/conditional"), seed, e, it, rep.epoch_conditional[e], hx - mi.targets[e], wall});
  }
  if (cfg.log_every)
    for (std::size_t i = 0; i < rep.loss_trace.size(); i += cfg.log_every)
      out.rows.push_back({series(cfg, "knife/train"), seed, i / iters, i, rep.loss_trace[i], std::nullopt, wall});
  return out;
}

// ---------------------------------------------------------------------------
// Boost

SeedOutput run_boost(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  const BoostSection& b = cfg.boost;
  const TriangleMixtureSpec spec = triangle_spec(cfg);
  const double oracle = oracle_entropy_triangle(spec);
  Rng data_rng = make_rng(seed, 0);
  const SupportSet support{sample_triangle_mixture(spec, support_size(cfg), data_rng)};
  const Dataset train{sample_triangle_mixture(spec, b.train_size, data_rng), {}, {}};
  const Dataset eval{sample_triangle_mixture(spec, b.eval_size, data_rng), {}, {}};

  const Stopwatch clock(opts.timing);
  const TrainConfig t = seeded(cfg, seed);
  DiscriminatorConfig dcfg;
  dcfg.hidden_width = b.hidden_width;
  dcfg.learning_rate = b.disc_learning_rate;
  dcfg.iterations = b.disc_iterations;
  dcfg.batch_size = b.disc_batch;
  dcfg.seed = seed;

  KnifeParams theta;
  Discriminator disc;
  if (b.lambda > 0.0) {
    JointFitReport joint = relaxed_joint_fit(train, support, t, b.hidden_width, b.lambda);
    theta = std::move(joint.theta);
    disc = std::move(joint.disc);
  } else {
    theta = fit_entropy(train, eval, support, cfg.modes.front(), t).final_params;
    disc = train_discriminator(theta, train, dcfg);
  }
  Rng score_rng = make_rng(seed, 6);
  const BoostReport r = boost_report(theta, eval.samples, disc, score_rng, b.lambda);
  const double wall = clock.ms();
  const std::size_t it = t.epochs * t.iterations_per_epoch;
  SeedOutput out;
  out.rows.push_back({series(cfg, "plain"), seed, 0, it, r.plain_entropy, oracle, wall});
  out.rows.push_back({series(cfg, "boosted-quadratic"), seed, 0, it, r.boosted_entropy_1, oracle, wall});
  out.rows.push_back({series(cfg, "boosted-log"), seed, 0, it, r.boosted_entropy_2, oracle, wall});
  out.extra = {{"pe_hat", r.pe_hat},
               {"ce_hat", r.ce_hat},
               {"kl_lb_quadratic", r.bounds.quadratic},
               {"kl_lb_log", r.bounds.log},
               {"kl_lb_ce_quadratic", r.bounds.ce_quadratic},
               {"kl_lb_ce_log", r.bounds.ce_log},
               {"folded", r.bounds.folded},
               {"capped", r.bounds.capped},
               {"plain_entropy", r.plain_entropy},
               {"boosted_entropy_1", r.boosted_entropy_1},
               {"boosted_entropy_2", r.boosted_entropy_2},
               {"lambda", r.lambda}};
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checks

SeedOutput run_gradcheck(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  const Stopwatch clock(opts.timing);
  // Instance seeds are disjoint across run seeds.
  const auto results = run_gradcheck_suite(cfg.gradcheck.instances, seed * 1000003ULL, cfg.gradcheck.step);
  SeedOutput out;
  double worst = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    out.rows.push_back({series(cfg, results[i].kind), seed, 0, i, results[i].max_relative_error, 0.0, clock.ms()});
    worst = std::max(worst, results[i].max_relative_error);
  }
  out.extra = {{"max_relative_error", worst}};
  return out;
}

SeedOutput run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  const std::string& id = cfg.id;
  if (id == "gauss-entropy" || id == "gauss-shrink") return run_gauss(cfg, seed, opts);
  if (id == "triangle-1d" || id == "triangle-8d") return run_triangle(cfg, seed, opts);
  if (id == "mi-gauss-staircase" || id == "mi-cubic" || id == "mi-uniform") return run_mi(cfg, seed, opts);
  if (id == "boost-demo") return run_boost(cfg, seed, opts);
  if (id == "gradcheck") return run_gradcheck(cfg, seed, opts);
  throw ConfigError("experiment '" + id + "' has no per-seed runner");
}

// ---------------------------------------------------------------------------
// Bounds (seed-independent)

KernelId parse_kernel(const std::string& name) {
  if (name == "gaussian") return KernelId::gaussian;
  if (name == "truncated_gaussian") return KernelId::truncated_gaussian;
  throw ConfigError("bounds.kernel must be 'gaussian' or 'truncated_gaussian'");
}

void run_bounds(const ExperimentConfig& cfg, RunResult& result) {
  const BoundsSection& b = cfg.bounds;
  BoundInputs base;
  base.dim = b.dim;
  base.delta = b.delta;
  base.lipschitz = b.lipschitz;
  base.n = base.m = base.w = 1.0;
  try {
    base = with_constants(base, parse_kernel(b.kernel));
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  json schedule = json::array();
  bool monotone = true;
  double previous = std::numeric_limits<double>::infinity();
  const auto points = scan_schedule(log_space(b.n_min, b.n_max, b.n_count), b.w_exponent, b.m_exponent, base);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const SchedulePoint& p = points[i];
    const BoundValue& v = p.value;
    result.bound_rows.push_back({p.inputs.n, p.inputs.m, p.inputs.w, p.inputs.delta,
                                 v.feasible ? std::optional<double>(v.epsilon) : std::nullopt});
    if (v.feasible) result.rows.push_back({series(cfg, "schedule"), 0, i, 0, v.epsilon, std::nullopt, 0.0});
    // Infeasible points count as +inf, so the sequence may only fall.
    if (v.epsilon > previous) monotone = false;
    previous = v.epsilon;
    schedule.push_back({{"N", p.inputs.n},
                        {"M", p.inputs.m},
                        {"w", p.inputs.w},
                        {"feasible", v.feasible},
                        {"epsilon", v.feasible ? json(v.epsilon) : json("infeasible")},
                        {"log_argument", v.log_argument},
                        {"N_w", p.limits.n_w},
                        {"sampling_ratio", p.limits.sampling_ratio}});
  }
  for (double n : b.grid_n)
    for (double m : b.grid_m)
      for (double w : b.grid_w)
        for (double delta : b.grid_delta) {
          BoundInputs in = base;
          in.n = n;
          in.m = m;
          in.w = w;
          in.delta = delta;
          const BoundValue v = epsilon_bound(in);
          result.bound_rows.push_back({n, m, w, delta, v.feasible ? std::optional<double>(v.epsilon) : std::nullopt});
        }
  result.summary["bounds"] = {{"kernel", b.kernel},
                              {"k_max", base.k_max},
                              {"c1", base.c1},
                              {"c2", base.c2},
                              {"schedule", schedule},
                              {"schedule_monotone_nonincreasing", monotone}};
}

// ---------------------------------------------------------------------------
// Aggregation

json stats(std::vector<double> v) {
  if (v.empty()) return json::object();
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  const std::size_t h = v.size() / 2;
  const double median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return {{"mean", mean}, {"std", sd}, {"median", median}, {"max", v.back()}, {"min", v.front()}};
}

bool is_train_series(const std::string& name) { return name.size() > 6 && name.ends_with("/train"); }

}  // namespace

json summarize_rows(const std::vector<ResultRow>& rows) {
  // series -> seed -> epoch -> last row of that epoch
  std::map<std::string, std::map<std::uint64_t, std::map<std::size_t, const ResultRow*>>> by_series;
  std::vector<std::string> order;
  for (const ResultRow& r : rows) {
    if (is_train_series(r.experiment)) continue;
    if (!by_series.count(r.experiment)) order.push_back(r.experiment);
    by_series[r.experiment][r.seed][r.epoch] = &r;
  }
  json out = json::object();
  for (const std::string& name : order) {
    const auto& seeds = by_series[name];
    std::vector<double> final_err, final_est;
    json per_seed = json::array();
    std::map<std::size_t, std::vector<double>> epoch_err, epoch_est;
    for (const auto& [seed, epochs] : seeds) {
      const ResultRow& last = *epochs.rbegin()->second;
      final_est.push_back(last.estimate);
      json s = {{"seed", seed}, {"estimate", last.estimate}};
      if (last.oracle) {
        s["oracle"] = *last.oracle;
        s["abs_error"] = last.abs_error();
        final_err.push_back(last.abs_error());
      }
      per_seed.push_back(s);
      for (const auto& [e, row] : epochs) {
        epoch_est[e].push_back(row->estimate);
        if (row->oracle) epoch_err[e].push_back(row->abs_error());
      }
    }
    json epochs = json::array();
    for (const auto& [e, est] : epoch_est) {
      json ej = {{"epoch", e}, {"estimate", stats(est)}};
      if (epoch_err.count(e)) ej["abs_error"] = stats(epoch_err[e]);
      epochs.push_back(ej);
    }
    json s = {{"final_estimate", stats(final_est)}, {"per_seed", per_seed}, {"epochs", epochs}};
    if (!final_err.empty()) {
      const json st = stats(final_err);
      s["final_abs_error"] = st;
      s["mean_abs_error"] = st["mean"];
      s["std_abs_error"] = st["std"];
      s["median_abs_error"] = st["median"];
      s["max_abs_error"] = st["max"];
    }
    out[name] = s;
  }
  return out;
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  RunResult result;
  result.summary = {{"experiment", cfg.id}, {"seeds", cfg.seeds}};
  if (cfg.id == "bounds-scan") {
    run_bounds(cfg, result);
  } else {
    std::mutex log_mutex;
    std::vector<std::future<SeedOutput>> jobs;
    for (std::uint64_t seed : cfg.seeds)
      jobs.push_back(std::async(std::launch::async, [&, seed] {
        const auto start = Clock::now();
        SeedOutput o = run_seed(cfg, seed, opts);
        if (!opts.quiet) {
          const std::lock_guard lock(log_mutex);
          std::cerr << "[" << cfg.id << "] seed " << seed << " done in "
                    << std::chrono::duration<double>(Clock::now() - start).count() << " s\n";
        }
        return o;
      }));
    json extras = json::array();
    bool any_extra = false;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      SeedOutput o = jobs[i].get();
      result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
      any_extra = any_extra || !o.extra.empty();
      extras.push_back({{"seed", cfg.seeds[i]}, {"details", o.extra}});
    }
    if (any_extra) result.summary["per_seed_details"] = extras;
  }
  result.summary["series"] = summarize_rows(result.rows);
  if (cfg.id == "gradcheck") {
    double worst = 0.0;
    for (const ResultRow& r : result.rows) worst = std::max(worst, r.estimate);
    result.summary["max_relative_error"] = worst;
    result.summary["tolerance"] = cfg.gradcheck.tolerance;
    if (!(worst < cfg.gradcheck.tolerance)) {
      result.check_passed = false;
      result.check_messages.push_back("max relative gradient error " + std::to_string(worst) + " >= tolerance");
    }
  }
  return result;
}

void apply_checks(const ExperimentConfig& cfg, RunResult& result) {
  const json& series_summary = result.summary["series"];
  for (const auto& [name, metrics] : cfg.check.items()) {
    if (!metrics.is_object()) throw ConfigError("check entries must map metric names to thresholds");
    if (name == "bounds") {
      for (const auto& [metric, expected] : metrics.items()) {
        const json& b = result.summary.at("bounds");
        if (!b.contains(metric)) throw ConfigError("unknown bounds check '" + metric + "'");
        const bool ok = b[metric] == expected;
        if (!ok) {
          result.check_passed = false;
          result.check_messages.push_back("bounds." + metric + " is " + b[metric].dump());
        }
      }
      continue;
    }
    if (!series_summary.contains(name)) throw ConfigError("check refers to unknown series '" + name + "'");
    for (const auto& [metric, threshold] : metrics.items()) {
      const json& s = series_summary[name];
      if (!s.contains(metric) || !threshold.is_number())
        throw ConfigError("unknown check metric '" + metric + "' for series '" + name + "'");
      const double value = s[metric].get<double>();
      const bool ok = value <= threshold.get<double>();
      result.check_messages.push_back(std::string(ok ? "PASS " : "FAIL ") + name + " " + metric + " = " +
                                      std::to_string(value) + " (limit " + threshold.dump() + ")");
      if (!ok) result.check_passed = false;
    }
  }
}

}  // namespace knife::harness
