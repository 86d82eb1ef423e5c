#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbmint/cli.hpp"
#include "fbmint/errors.hpp"
#include "fbmint/market.hpp"

namespace fbmint::detail {

using json = nlohmann::ordered_json;

struct Run {
  const ExperimentConfig& cfg;
  HurstParam h;
  json paths = json::array();
  json aggregates = json::object();
  std::vector<TestVerdict> verdicts;
  std::ostringstream paths_csv, ledger_csv, terminals_csv;
  std::size_t path_rows = 0, ledger_rows = 0, terminal_rows = 0;
  std::size_t path_errors = 0;
  bool path_based = false;

  explicit Run(const ExperimentConfig& c) : cfg(c), h(c.hurst) {}
};

std::string fmt17(double x);
MarketParams market_params(const ExperimentConfig& cfg);

void csv_path_rows(Run& run, std::size_t index, const MarketPath& m);
void csv_ledger_rows(Run& run, std::size_t index, const PortfolioLedger& led);
void csv_terminal_row(Run& run, std::size_t index, bool resolved, double terminal, double target);

json records_json(const std::vector<StoppingRecord>& records);
TestVerdict make_verdict(std::string name, double statistic, double threshold, bool passed, std::size_t n,
                         std::string notes, std::uint64_t seed);

void run_generate(Run& run);
void run_ito_check(Run& run);
void run_diverge(Run& run);
void run_represent_distribution(Run& run);
void run_represent_improper(Run& run);
void run_replicate(Run& run);
void run_arbitrage(Run& run);
void run_hedge_weak(Run& run);
void run_hedge_holder(Run& run);
void run_verify_small_ball(Run& run);
void run_verify_sign_lemma(Run& run);
void run_verify_all(Run& run);

}  // namespace fbmint::detail
