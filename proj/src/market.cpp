#include "fbmint/market.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbmint/errors.hpp"

namespace fbmint {

namespace {

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':')) out.push_back(item);
  return out;
}

double num(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("bad number '" + s + "' in rate " + ctx);
}

}  // namespace

RateSpec RateSpec::parse(const std::string& text) {
  const auto p = split(text);
  RateSpec r;
  r.text = text;
  if (p.size() == 2 && p[0] == "const") {
    r.kind = Kind::constant;
    r.p0 = num(p[1], text);
  } else if (p.size() == 3 && p[0] == "linear") {
    r.kind = Kind::linear;
    r.p0 = num(p[1], text);
    r.p1 = num(p[2], text);
  } else if (p.size() == 3 && p[0] == "clamped-path") {
    r.kind = Kind::clamped_path;
    r.p0 = num(p[1], text);
    r.p1 = num(p[2], text);
  } else {
    throw ConfigError("unknown rate spec '" + text + "'");
  }
  return r;
}

std::vector<double> RateSpec::sample(const FbmPath& path, double r_max) const {
  std::vector<double> r(path.values.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double t = path.grid[i];
    switch (kind) {
      case Kind::constant:
        r[i] = p0;
        break;
      case Kind::linear:
        r[i] = p0 + (p1 - p0) * t;
        break;
      case Kind::clamped_path:
        r[i] = std::clamp(p0 + p1 * path.values[i], -r_max, r_max);
        break;
    }
  }
  return r;
}

void MarketParams::validate() const {
  if (!(s0 > 0.0)) throw ConfigError("s0 must be positive");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (!(r_max >= 0.0)) throw ConfigError("r_max must be nonnegative");
  auto within = [&](double r) { return std::abs(r) <= r_max; };
  switch (rate.kind) {
    case RateSpec::Kind::constant:
      if (!within(rate.p0)) throw ConfigError("constant rate exceeds r_max");
      break;
    case RateSpec::Kind::linear:
      if (!within(rate.p0) || !within(rate.p1)) throw ConfigError("linear rate exceeds r_max");
      break;
    case RateSpec::Kind::clamped_path:
      break;
  }
}

MarketPath simulate_market(const FbmPath& path, const MarketParams& params) {
  params.validate();
  MarketPath m{path, params, params.rate.sample(path, params.r_max), {}, {}, {}};
  const std::size_t n = path.values.size();
  m.bond.assign(n, 1.0);
  m.stock.assign(n, params.s0);
  m.discounted.assign(n, params.s0);
  double integral = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) integral += 0.5 * (m.rate[i - 1] + m.rate[i]) * (path.grid[i] - path.grid[i - 1]);
    m.bond[i] = std::exp(integral);
    m.stock[i] = params.s0 * std::exp(params.mu * path.grid[i] + params.sigma * path.values[i]);
    m.discounted[i] = m.stock[i] / m.bond[i];
  }
  return m;
}

Driver market_driver(const MarketPath& m) {
  Driver d;
  d.sigma = m.params.sigma;
  d.drift.resize(m.rate.size());
  for (std::size_t i = 0; i < m.rate.size(); ++i) d.drift[i] = m.params.mu - m.rate[i];
  return d;
}

double PortfolioLedger::bookkeeping_residual(const MarketPath& m) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < V.size(); ++i) {
    const double scale = 1.0 + std::abs(V[i]) + std::abs(pi0[i] * m.bond[i]) + std::abs(pi1[i] * m.stock[i]);
    worst = std::max(worst, std::abs(V[i] - (pi0[i] * m.bond[i] + pi1[i] * m.stock[i])) / scale);
    worst = std::max(worst, std::abs(C[i] * m.bond[i] - V[i]) / scale);
  }
  return worst;
}

namespace {

// trapezoid drift part int a (mu - r) X ds at every grid point
std::vector<double> drift_running(const Integrand& aX, const MarketPath& m) {
  std::vector<double> out(aX.values.size(), 0.0);
  const auto& t = m.path.grid.points();
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    const auto [l, r] = aX.cell(i);
    const double dl = m.params.mu - m.rate[i];
    const double dr = m.params.mu - m.rate[i + 1];
    out[i + 1] = out[i] + 0.5 * (l * dl + r * dr) * (t[i + 1] - t[i]);
  }
  return out;
}

PortfolioLedger ledger_from(const MarketPath& m, const Integrand& pi1, std::vector<double> c) {
  PortfolioLedger led;
  led.grid = m.path.grid;
  led.pi1_integrand = pi1;
  const std::size_t n = c.size();
  led.pi1 = pi1.values;
  led.pi0.resize(n);
  led.V.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    led.pi0[i] = c[i] - led.pi1[i] * m.discounted[i];
    led.V[i] = led.pi0[i] * m.bond[i] + led.pi1[i] * m.stock[i];
  }
  led.C = std::move(c);
  led.tau_index = n - 1;
  return led;
}

std::vector<double> reciprocal(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / x[i];
  return out;
}

}  // namespace

double integrate_against_X(const Integrand& a, const MarketPath& m, double t, AlphaParam alpha) {
  const Integrand aX = a.scaled(m.discounted);
  const std::size_t it = m.path.grid.index_of(t);
  const double drift = drift_running(aX, m)[it];
  if (it == 0) return 0.0;
  return drift + m.params.sigma * gls_integral(aX, m.path, 0.0, t, alpha);
}

PortfolioLedger apply_strategy(const Integrand& pi1, double v0, const MarketPath& m, AlphaParam alpha) {
  alpha.require_window(m.path.hurst);
  const Integrand aX = pi1.scaled(m.discounted);
  const std::vector<double> drift = drift_running(aX, m);
  const std::vector<double> noise = gls_running(aX, m.path);
  std::vector<double> c(drift.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = v0 + drift[i] + m.params.sigma * noise[i];
  return ledger_from(m, pi1, std::move(c));
}

namespace {

PortfolioLedger from_prescribed(const MarketPath& m, const PrescribedResult& r) {
  const Integrand pi1 = r.integrand.scaled(reciprocal(m.discounted));
  PortfolioLedger led = ledger_from(m, pi1, r.running);
  led.resolved = r.resolved;
  led.tau_index = r.tau_index;
  led.target = r.target;
  led.records = r.records;
  return led;
}

}  // namespace

PortfolioLedger strong_arbitrage_strategy(const MarketPath& m, double c, const DivergentParams& params,
                                          AlphaParam alpha) {
  if (!(c > 0.0)) throw ArgumentError("arbitrage level must be positive");
  alpha.require_window(m.path.hurst);
  const double level = c * std::exp(m.params.r_max);
  const PrescribedResult r =
      prescribed_distribution_integrand(m.path, [level](double) { return level; }, params, market_driver(m));
  return from_prescribed(m, r);
}

PortfolioLedger prescribed_terminal_distribution(const MarketPath& m, const TargetDistribution& target,
                                                 const DivergentParams& params, AlphaParam alpha) {
  alpha.require_window(m.path.hurst);
  return from_prescribed(m, prescribed_distribution_integrand(m.path, target, params, market_driver(m)));
}

PortfolioLedger weak_hedge(const MarketPath& m, const ClaimSpec& claim, double v0, const WeakHedgeSetup& setup,
                           AlphaParam alpha) {
  alpha.require_window(m.path.hurst);
  const auto idx = setup.outer.realize(m.path.grid);
  std::vector<double> xi = claim_values_at(claim, m.path, idx);
  // discounted claim estimate at t_n, with the rate frozen over the rest of [t_n, 1]
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const double t = m.path.grid[idx[n]];
    xi[n] /= m.bond[idx[n]] * std::exp(m.rate[idx[n]] * (1.0 - t));
  }
  const ImproperResult r = improper_representation(m.path, xi, setup.outer, setup.nested, market_driver(m), v0);
  const Integrand pi1 = r.integrand.scaled(reciprocal(m.discounted));
  PortfolioLedger led = ledger_from(m, pi1, r.x);
  led.resolved = !r.resolved.empty() && r.resolved.back();
  led.target = idx.size() >= 2 ? xi[idx.size() - 2] : v0;
  led.records = r.records;
  return led;
}

PortfolioLedger holder_hedge(const MarketPath& m, const ClaimSpec& claim, double v0, const ReplicationParams& rp,
                             const ReplicationSetup& setup) {
  rp.validate(m.path.hurst);
  const BlockPartition part(rp.gamma, setup.n_max, setup.points_per_block);
  const auto idx = part.realize(m.path.grid);
  std::vector<double> xi = claim_values_at(claim, m.path, idx);
  for (std::size_t n = 0; n < idx.size(); ++n) xi[n] /= m.bond[idx[n]];
  const ReplicationResult r = replicate_sequence(m.path, xi, rp, setup, market_driver(m), v0, 1);
  const Integrand pi1 = r.integrand.scaled(reciprocal(m.discounted));
  PortfolioLedger led = ledger_from(m, pi1, r.running);
  led.records = r.case_log;
  led.resolved = !r.case_log.empty() && r.case_log.back().triggered;
  led.target = idx.size() >= 2 ? xi[idx.size() - 2] : v0;
  led.verbatim_rule_changes = r.verbatim_rule_changes;
  led.driftless_rule_changes = r.driftless_rule_changes;
  return led;
}

}  // namespace fbmint
