#include <cstdio>
#include <fstream>
#include <sstream>

#include "harness/experiment.hpp"

namespace knife::harness {

namespace {

constexpr const char* kResultsHeader = "experiment,seed,epoch,iteration,estimate,oracle,abs_error,wall_ms";

// Shortest text that round-trips the double exactly.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw OutputError("write failed for '" + path.string() + "'");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out = open_out(path);
  out << kResultsHeader << '\n';
  for (const ResultRow& r : rows) {
    out << r.experiment << ',' << r.seed << ',' << r.epoch << ',' << r.iteration << ',' << num(r.estimate) << ','
        << (r.oracle ? num(*r.oracle) : "") << ',' << (r.oracle ? num(r.abs_error()) : "") << ',' << num(r.wall_ms)
        << '\n';
  }
  finish(out, path);
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw ConfigError("'" + path.string() + "' has an unexpected header");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 8) throw ConfigError("line " + std::to_string(lineno) + ": expected 8 columns");
    try {
      ResultRow r;
      r.experiment = c[0];
      r.seed = std::stoull(c[1]);
      r.epoch = std::stoull(c[2]);
      r.iteration = std::stoull(c[3]);
      r.estimate = std::stod(c[4]);
      if (!c[5].empty()) r.oracle = std::stod(c[5]);
      r.wall_ms = std::stod(c[7]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

void write_bounds_csv(const std::filesystem::path& path, const std::vector<BoundRow>& rows) {
  std::ofstream out = open_out(path);
  out << "N,M,w,delta,epsilon\n";
  for (const BoundRow& r : rows)
    out << num(r.n) << ',' << num(r.m) << ',' << num(r.w) << ',' << num(r.delta) << ','
        << (r.epsilon ? num(*r.epsilon) : "infeasible") << '\n';
  finish(out, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

void write_outputs(const ExperimentConfig& cfg, const RunResult& result) {
  write_results_csv(cfg.output / "results.csv", result.rows);
  nlohmann::json summary = result.summary;
  if (!result.check_messages.empty()) {
    summary["check"] = {{"passed", result.check_passed}, {"messages", result.check_messages}};
  }
  write_json(cfg.output / "summary.json", summary);
  if (cfg.id == "bounds-scan") write_bounds_csv(cfg.output / "bounds.csv", result.bound_rows);
}

}  // namespace knife::harness
