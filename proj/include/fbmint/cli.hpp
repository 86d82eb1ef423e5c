#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbmint/verify.hpp"

namespace fbmint {

// Flat key = value configuration; '#' starts a comment.
struct ExperimentConfig {
  double hurst = 0.7;
  std::size_t grid_size = 8192;
  std::uint64_t master_seed = 1;
  std::size_t n_paths = 200;
  double alpha = 0.0;  // 0: default for the Hurst index
  double gamma = 1.2;
  double beta = 0.1;
  int n_max = 0;  // 0: largest n whose block spans 4 grid steps
  int points_per_block = 32;
  double scale = 50.0;
  double s0 = 1.0;
  double mu = 0.1;
  double sigma = 0.2;
  std::string rate_spec = "const:0.03";
  double r_max = 0.05;
  std::string claim_spec = "custom_marks:square:0.5";
  std::string improper_claim = "custom_marks:identity:0.9";
  std::string weak_claim = "custom_marks:step:0.4";
  std::string target_distribution_spec = "exp:1";
  std::string output_dir = "fbmint_out";
  double arbitrage_c = 1.0;
  std::vector<double> weak_v0s{-1.0, 0.0, 2.0};
  std::vector<double> holder_v0s{-1.0, 0.0, 1.0};
  double holder_a = 0.0;  // 0: 0.6 H
  int replication_n_max = 16;
  std::size_t replication_base = 256;
  double outer_gamma = 2.0;
  int outer_blocks = 20;
  std::size_t outer_base = 1024;
  int nested_k_max = 8;
  int nested_points = 16;
  std::size_t ledger_paths = 5;
  std::size_t verify_paths = 10000;
  std::size_t ito_paths = 100;

  AlphaParam alpha_param() const;
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// applies one key; throws ConfigError for unknown keys or bad values
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

const std::vector<std::string>& subcommands();

struct ExperimentReport {
  nlohmann::ordered_json report;  // deterministic
  std::vector<TestVerdict> verdicts;
  bool passed = true;
  double seconds = 0.0;
};

// Runs a subcommand; with write_files the report, timing and CSV files go to
// cfg.output_dir.
ExperimentReport run_experiment(const std::string& subcommand, const ExperimentConfig& cfg, bool write_files);

// exit codes: 0 every verdict passed, 3 some verdict failed, 2 configuration
// error, 1 runtime error
int run_cli(int argc, char** argv);

}  // namespace fbmint
