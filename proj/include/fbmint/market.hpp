#pragma once

#include <string>
#include <vector>

#include "fbmint/claims.hpp"
#include "fbmint/constructions.hpp"
#include "fbmint/distributions.hpp"
#include "fbmint/fbm.hpp"
#include "fbmint/frac_calc.hpp"

namespace fbmint {

// const:<r>  linear:<r0>:<r1>  clamped-path:<r0>:<k>  (r0 + k B_t clipped to +-r_max)
struct RateSpec {
  enum class Kind { constant, linear, clamped_path };
  Kind kind = Kind::constant;
  double p0 = 0.03;
  double p1 = 0.0;
  std::string text = "const:0.03";

  static RateSpec parse(const std::string& text);
  std::vector<double> sample(const FbmPath& path, double r_max) const;
};

struct MarketParams {
  double s0 = 1.0;
  double mu = 0.1;
  double sigma = 0.2;
  RateSpec rate;
  double r_max = 0.05;

  void validate() const;
  StockModel stock() const { return {s0, mu, sigma}; }
};

struct MarketPath {
  FbmPath path;
  MarketParams params;
  std::vector<double> rate;
  std::vector<double> bond;
  std::vector<double> stock;
  std::vector<double> discounted;
};

MarketPath simulate_market(const FbmPath& path, const MarketParams& params);

// sigma dB + (mu - r) dt, the integrator of pi1 X against dX / X
Driver market_driver(const MarketPath& m);

struct PortfolioLedger {
  TimeGrid grid;
  std::vector<double> pi0;
  std::vector<double> pi1;
  std::vector<double> V;
  std::vector<double> C;
  Integrand pi1_integrand;
  bool resolved = true;
  std::size_t tau_index = 0;
  double target = 0.0;
  std::vector<StoppingRecord> records;
  int verbatim_rule_changes = 0;
  int driftless_rule_changes = 0;

  // max |V - (pi0 B + pi1 S)| and max |C B - V| relative to scale
  double bookkeeping_residual(const MarketPath& m) const;
};

// int_0^t a dX = int a (mu - r) X ds + sigma int a X dB
double integrate_against_X(const Integrand& a, const MarketPath& m, double t, AlphaParam alpha);

PortfolioLedger apply_strategy(const Integrand& pi1, double v0, const MarketPath& m, AlphaParam alpha);

PortfolioLedger strong_arbitrage_strategy(const MarketPath& m, double c, const DivergentParams& params,
                                          AlphaParam alpha);

PortfolioLedger prescribed_terminal_distribution(const MarketPath& m, const TargetDistribution& target,
                                                 const DivergentParams& params, AlphaParam alpha);

struct WeakHedgeSetup {
  BlockPartition outer{2.0, 20, 32};
  NestedDivergent nested{NestedSpec{1.2, 8, 16}, 0.1, 50.0};
};

PortfolioLedger weak_hedge(const MarketPath& m, const ClaimSpec& claim, double v0, const WeakHedgeSetup& setup,
                           AlphaParam alpha);

PortfolioLedger holder_hedge(const MarketPath& m, const ClaimSpec& claim, double v0, const ReplicationParams& rp,
                             const ReplicationSetup& setup = {});

}  // namespace fbmint
