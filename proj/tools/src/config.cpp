#include <algorithm>
#include <fstream>
#include <set>

#include "harness/experiment.hpp"

namespace knife::harness {

using nlohmann::json;

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"gauss-entropy",      "gauss-shrink", "triangle-1d", "triangle-8d",
                                            "mi-gauss-staircase", "mi-cubic",     "mi-uniform",  "bounds-scan",
                                            "boost-demo",         "gradcheck"};
  return ids;
}

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void parse_train(const json& j, TrainConfig& t) {
  reject_unknown(j, "train",
                 {"learning_rate", "batch_size", "iterations_per_epoch", "epochs", "adam_beta1", "adam_beta2", "adam_eps",
                  "freeze_shifts", "freeze_weights", "theta_lr_multiplier", "modes", "covariance", "eval_size",
                  "gradcheck"});
  read(j, "learning_rate", t.learning_rate);
  read(j, "batch_size", t.batch_size);
  read(j, "iterations_per_epoch", t.iterations_per_epoch);
  read(j, "epochs", t.epochs);
  read(j, "adam_beta1", t.adam_beta1);
  read(j, "adam_beta2", t.adam_beta2);
  read(j, "adam_eps", t.adam_eps);
  read(j, "freeze_shifts", t.freeze_shifts);
  read(j, "freeze_weights", t.freeze_weights);
  read(j, "theta_lr_multiplier", t.theta_lr_multiplier);
  read(j, "modes", t.modes);
  read(j, "eval_size", t.eval_size);
  read(j, "gradcheck", t.gradcheck);
  std::string cov = "diagonal";
  read(j, "covariance", cov);
  if (cov == "diagonal")
    t.covariance = Covariance::diagonal;
  else if (cov == "full")
    t.covariance = Covariance::full;
  else
    throw ConfigError("covariance must be 'diagonal' or 'full'");
}

std::vector<std::uint64_t> parse_seeds(const json& j) {
  std::vector<std::uint64_t> seeds;
  if (j.is_array()) {
    for (const auto& s : j) {
      if (!s.is_number_integer() || s.get<std::int64_t>() < 0) throw ConfigError("seeds must be non-negative integers");
      seeds.push_back(s.get<std::uint64_t>());
    }
  } else if (j.is_object()) {
    reject_unknown(j, "seeds", {"count", "start"});
    std::uint64_t count = 0, start = 0;
    read(j, "count", count);
    read(j, "start", start);
    for (std::uint64_t i = 0; i < count; ++i) seeds.push_back(start + i);
  } else {
    throw ConfigError("seeds must be a list or {\"count\", \"start\"}");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  return seeds;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  reject_unknown(j, "config",
                 {"experiment", "seeds", "train", "estimators", "log_every", "support_size", "gaussian", "triangle", "mi",
                  "bounds", "boost", "gradcheck", "check", "output"});
  ExperimentConfig c;
  read(j, "experiment", c.id);
  const auto& ids = experiment_ids();
  if (std::find(ids.begin(), ids.end(), c.id) == ids.end()) throw ConfigError("unknown experiment id '" + c.id + "'");
  if (j.contains("seeds")) c.seeds = parse_seeds(j["seeds"]);
  if (j.contains("train")) parse_train(j["train"], c.train);
  if (j.contains("estimators")) {
    c.modes.clear();
    for (const auto& m : j["estimators"]) {
      try {
        c.modes.push_back(parse_estimator_mode(m.get<std::string>()));
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }
    if (c.modes.empty()) throw ConfigError("estimators must not be empty");
  }
  read(j, "log_every", c.log_every);
  read(j, "support_size", c.support_size);

  if (j.contains("gaussian")) {
    const json& g = j["gaussian"];
    reject_unknown(g, "gaussian", {"dim", "shrink"});
    read(g, "dim", c.gaussian.dim);
    read(g, "shrink", c.gaussian.shrink);
  }
  if (j.contains("triangle")) {
    const json& t = j["triangle"];
    reject_unknown(t, "triangle", {"components", "dim", "spec_seed", "weights", "scales"});
    read(t, "components", c.triangle.components);
    read(t, "dim", c.triangle.dim);
    read(t, "spec_seed", c.triangle.spec_seed);
    read(t, "weights", c.triangle.weights);
    read(t, "scales", c.triangle.scales);
  }
  if (j.contains("mi")) {
    const json& m = j["mi"];
    reject_unknown(m, "mi", {"dim", "targets", "cubic", "hidden_width", "cond_modes"});
    read(m, "dim", c.mi.dim);
    read(m, "targets", c.mi.targets);
    read(m, "cubic", c.mi.cubic);
    read(m, "hidden_width", c.mi.hidden_width);
    read(m, "cond_modes", c.mi.cond_modes);
    if (c.mi.targets.empty()) throw ConfigError("mi.targets must not be empty");
  }
  if (j.contains("bounds")) {
    const json& b = j["bounds"];
    reject_unknown(b, "bounds",
                   {"n_min", "n_max", "n_count", "w_exponent", "m_exponent", "grid_n", "grid_m", "grid_w", "grid_delta",
                    "dim", "delta", "lipschitz", "kernel"});
    read(b, "n_min", c.bounds.n_min);
    read(b, "n_max", c.bounds.n_max);
    read(b, "n_count", c.bounds.n_count);
    read(b, "w_exponent", c.bounds.w_exponent);
    read(b, "m_exponent", c.bounds.m_exponent);
    read(b, "grid_n", c.bounds.grid_n);
    read(b, "grid_m", c.bounds.grid_m);
    read(b, "grid_w", c.bounds.grid_w);
    read(b, "grid_delta", c.bounds.grid_delta);
    read(b, "dim", c.bounds.dim);
    read(b, "delta", c.bounds.delta);
    read(b, "lipschitz", c.bounds.lipschitz);
    read(b, "kernel", c.bounds.kernel);
  }
  if (j.contains("boost")) {
    const json& b = j["boost"];
    reject_unknown(b, "boost",
                   {"hidden_width", "disc_learning_rate", "disc_iterations", "disc_batch", "train_size", "eval_size",
                    "lambda"});
    read(b, "hidden_width", c.boost.hidden_width);
    read(b, "disc_learning_rate", c.boost.disc_learning_rate);
    read(b, "disc_iterations", c.boost.disc_iterations);
    read(b, "disc_batch", c.boost.disc_batch);
    read(b, "train_size", c.boost.train_size);
    read(b, "eval_size", c.boost.eval_size);
    read(b, "lambda", c.boost.lambda);
  }
  if (j.contains("gradcheck")) {
    const json& g = j["gradcheck"];
    reject_unknown(g, "gradcheck", {"instances", "step", "tolerance"});
    read(g, "instances", c.gradcheck.instances);
    read(g, "step", c.gradcheck.step);
    read(g, "tolerance", c.gradcheck.tolerance);
  }
  if (j.contains("check")) {
    c.check = j["check"];
    if (!c.check.is_object()) throw ConfigError("check must be an object");
  }
  std::string out = c.output.string();
  read(j, "output", out);
  c.output = out;

  try {
    c.train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (c.gaussian.dim < 1 || c.mi.dim < 1 || c.triangle.dim < 1) throw ConfigError("dimensions must be positive");
  if (c.mi.cond_modes < 1 || c.mi.hidden_width < 1) throw ConfigError("mi network sizes must be positive");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config '" + path.string() + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace knife::harness
