#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "robayes/mixtures.hpp"
#include "robayes/simulate.hpp"

namespace robayes::cli {

using json = nlohmann::json;

// 17 significant digits, the CSV number format.
std::string fmt17(double v);

std::string sha256_hex(const std::string& bytes);

// "lo,hi,n" -> uniform grid.
Grid parse_grid_arg(const std::string& text, const std::string& flag);
json grid_json(const Grid& g);
Grid grid_from_json(const json& j, const std::string& where);

json distribution_json(const DiscreteDistribution& d);
DiscreteDistribution distribution_from_json(const json& j, const std::string& where);

// Reads and parses a JSON file; malformed input raises malformed_file with line and column.
json read_json_file(const std::string& path);
bool looks_like_file(const std::string& arg);

// A prior argument is a shorthand (dirac:c, gauss:A, unif:lo,hi, unif:B, twopoint:a, unif03, dirac) or
// a JSON file holding a distribution, an NPMLE fit (its mixing) or a Mallows solution (its G*).
struct PriorArg {
  PriorSpec spec;
  json echo;  // shorthand string or distribution
};
PriorArg load_prior(const std::string& arg);

// gauss | laplace[:scale] | tukey | huber:eps | mallows:eps
NoiseKernel parse_kernel(const std::string& text, const SolverConfig& solver = {});

// One numeric column, optional header line; errors name the offending line.
std::vector<double> read_data_csv(const std::string& path);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row);
  std::string render(const std::string& manifest_name) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Collects outputs of one invocation and writes the manifest that references them.
class RunContext {
 public:
  RunContext(std::string command, std::vector<std::string> argv, std::string out_dir, std::string manifest_name);

  const std::string& manifest_name() const { return manifest_name_; }
  json& config() { return config_; }
  json& seeds() { return seeds_; }

  // Paths are relative to the output directory.
  void write_csv(const std::string& rel, const CsvTable& t);
  void write_json(const std::string& rel, json j);
  void finish();

 private:
  void write_file(const std::string& rel, const std::string& bytes);

  std::string command_;
  std::vector<std::string> argv_;
  std::string out_dir_, manifest_name_;
  json config_ = json::object(), seeds_ = json::object();
  json artifacts_ = json::array();
  std::chrono::steady_clock::time_point start_;
};

// Manifest name derived from the main output path: results.csv -> results.manifest.json.
std::string manifest_for(const std::string& out_path);

}  // namespace robayes::cli
