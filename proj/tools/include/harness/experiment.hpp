#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "knife/training.hpp"

namespace knife::harness {

enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 1,
  exit_config = 2,
  exit_numeric = 3,
  exit_check = 4,
  exit_output = 5,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& experiment_ids();

struct GaussianSection {
  int dim = 10;
  double shrink = 1.0;
};

struct TriangleSection {
  std::size_t components = 2;
  int dim = 1;
  std::uint64_t spec_seed = 0;
  // Explicit spec; when empty a random one is drawn from spec_seed.
  std::vector<double> weights;
  std::vector<double> scales;
};

struct MiSection {
  int dim = 10;
  std::vector<double> targets{2.0, 4.0, 6.0, 8.0};  // nats, one per epoch
  bool cubic = false;
  int hidden_width = 128;
  int cond_modes = 16;
};

struct BoundsSection {
  // Schedule w = N^w_exponent, M = N^m_exponent over log-spaced N.
  double n_min = 1e2;
  double n_max = 1e6;
  std::size_t n_count = 9;
  double w_exponent = -1.1;
  double m_exponent = 5.0;
  // Extra grid rows (N x M x w x delta); optional.
  std::vector<double> grid_n;
  std::vector<double> grid_m;
  std::vector<double> grid_w;
  std::vector<double> grid_delta;
  int dim = 1;
  double delta = 0.05;
  double lipschitz = 0.01;
  std::string kernel = "gaussian";
};

struct BoostSection {
  int hidden_width = 64;
  double disc_learning_rate = 1e-3;
  std::size_t disc_iterations = 2000;
  std::size_t disc_batch = 128;
  std::size_t train_size = 20000;
  std::size_t eval_size = 20000;
  double lambda = 0.0;
};

struct GradcheckSection {
  std::size_t instances = 100;
  double step = 1e-5;
  double tolerance = 1e-5;
};

struct ExperimentConfig {
  std::string id;
  std::vector<std::uint64_t> seeds{0};
  TrainConfig train;
  std::vector<EstimatorMode> modes{EstimatorMode::knife};
  // Rows of training loss every `log_every` iterations; 0 disables them.
  std::size_t log_every = 0;
  std::size_t support_size = 0;  // 0: same as train.modes
  GaussianSection gaussian;
  TriangleSection triangle;
  MiSection mi;
  BoundsSection bounds;
  BoostSection boost;
  GradcheckSection gradcheck;
  // Thresholds applied in --check mode, e.g. {"median_abs_error": 0.15}.
  nlohmann::json check = nlohmann::json::object();
  std::filesystem::path output = "out";
};

/// Throws ConfigError on unknown ids, unknown keys or invalid values.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct ResultRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  double estimate = 0.0;
  std::optional<double> oracle;
  double wall_ms = 0.0;

  double abs_error() const { return oracle ? std::abs(estimate - *oracle) : 0.0; }
};

struct BoundRow {
  double n, m, w, delta;
  std::optional<double> epsilon;  // empty when infeasible
};

struct RunOptions {
  bool quiet = false;
  // Record wall-clock time per row; off by default so reruns are byte-identical.
  bool timing = false;
};

struct RunResult {
  std::vector<ResultRow> rows;
  std::vector<BoundRow> bound_rows;
  nlohmann::json summary;
  bool check_passed = true;
  std::vector<std::string> check_messages;
};

/// Runs every seed (concurrently) and aggregates; rows are ordered by seed
/// position, then series, then iteration.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Per-series statistics of the final (last-epoch) rows; needs nothing but
/// the rows themselves, so it can be recomputed from results.csv.
nlohmann::json summarize_rows(const std::vector<ResultRow>& rows);

/// Applies cfg.check thresholds to a finished run.
void apply_checks(const ExperimentConfig& cfg, RunResult& result);

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);
void write_bounds_csv(const std::filesystem::path& path, const std::vector<BoundRow>& rows);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Writes results.csv, summary.json and (for bounds-scan) bounds.csv into cfg.output.
void write_outputs(const ExperimentConfig& cfg, const RunResult& result);

}  // namespace knife::harness
