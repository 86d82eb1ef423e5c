#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cli_internal.hpp"
#include "fbmint/grid.hpp"

namespace fbmint::detail {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

// per-path loop; runtime failures are recorded and the batch goes on
template <class Body>
void each_path(Run& run, FbmSampler& sampler, Body&& body) {
  run.path_based = true;
  for (std::size_t i = 0; i < run.cfg.n_paths; ++i) {
    const std::uint64_t seed = derive_seed(run.cfg.master_seed, i);
    try {
      const FbmPath path = sampler.sample(seed);
      body(i, seed, path);
    } catch (const std::runtime_error& e) {
      ++run.path_errors;
      json rec;
      rec["index"] = i;
      rec["seed"] = seed;
      rec["error"] = e.what();
      run.paths.push_back(rec);
    }
  }
}

std::vector<int> checkpoints_of(int n) {
  std::vector<int> out{std::max(1, n / 4), std::max(1, n / 2), n};
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int auto_blocks(const ExperimentConfig& c, double length, std::size_t base) {
  return c.n_max > 0 ? c.n_max : BlockPartition::blocks_above(c.gamma, length, 4.0 / double(base));
}

double fraction(std::size_t k, std::size_t n) { return n == 0 ? 0.0 : double(k) / double(n); }

double safe_median(const std::vector<double>& v) { return v.empty() ? nan : median(v); }

NestedDivergent nested_of(const ExperimentConfig& c) {
  return NestedDivergent{NestedSpec{1.2, c.nested_k_max, c.nested_points}, c.beta, c.scale};
}

ReplicationSetup replication_setup(const ExperimentConfig& c) {
  ReplicationSetup s;
  s.n_max = c.replication_n_max;
  s.points_per_block = c.points_per_block;
  s.fallback = nested_of(c);
  return s;
}

ReplicationParams replication_params(const Run& run, const ClaimSpec& claim) {
  const double a = run.cfg.holder_a > 0.0 ? run.cfg.holder_a : claim.holder_exponent(run.h);
  return choose_replication_params(run.h, a);
}

double relative_error(double value, double truth) {
  return std::abs(value - truth) / std::max(std::abs(truth), 1e-12);
}

}  // namespace

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

MarketParams market_params(const ExperimentConfig& cfg) {
  MarketParams mp;
  mp.s0 = cfg.s0;
  mp.mu = cfg.mu;
  mp.sigma = cfg.sigma;
  mp.rate = RateSpec::parse(cfg.rate_spec);
  mp.r_max = cfg.r_max;
  return mp;
}

void csv_path_rows(Run& run, std::size_t index, const MarketPath& m) {
  if (run.path_rows == 0) run.paths_csv << "seed_index,t,B,S,X\n";
  for (std::size_t k = 0; k < m.path.values.size(); ++k) {
    run.paths_csv << index << ',' << fmt17(m.path.grid[k]) << ',' << fmt17(m.path.values[k]) << ','
                  << fmt17(m.stock[k]) << ',' << fmt17(m.discounted[k]) << '\n';
    ++run.path_rows;
  }
}

void csv_ledger_rows(Run& run, std::size_t index, const PortfolioLedger& led) {
  if (run.ledger_rows == 0) run.ledger_csv << "seed_index,t,pi0,pi1,V,C\n";
  for (std::size_t k = 0; k < led.V.size(); ++k) {
    run.ledger_csv << index << ',' << fmt17(led.grid[k]) << ',' << fmt17(led.pi0[k]) << ',' << fmt17(led.pi1[k])
                   << ',' << fmt17(led.V[k]) << ',' << fmt17(led.C[k]) << '\n';
    ++run.ledger_rows;
  }
}

void csv_terminal_row(Run& run, std::size_t index, bool resolved, double terminal, double target) {
  if (run.terminal_rows == 0) run.terminals_csv << "seed_index,resolved,terminal,target\n";
  run.terminals_csv << index << ',' << (resolved ? 1 : 0) << ',' << fmt17(terminal) << ',' << fmt17(target) << '\n';
  ++run.terminal_rows;
}

json records_json(const std::vector<StoppingRecord>& records) {
  json out = json::array();
  for (const auto& r : records) {
    json j;
    j["block"] = r.block;
    j["tau"] = r.tau;
    j["triggered"] = r.triggered;
    j["case"] = to_string(r.case_label);
    out.push_back(j);
  }
  return out;
}

TestVerdict make_verdict(std::string name, double statistic, double threshold, bool passed, std::size_t n,
                         std::string notes, std::uint64_t seed) {
  TestVerdict v;
  v.name = std::move(name);
  v.statistic = statistic;
  v.threshold = threshold;
  v.passed = passed;
  v.n_samples = n;
  v.notes = std::move(notes);
  v.seed = seed;
  return v;
}

void run_generate(Run& run) {
  const auto& c = run.cfg;
  const TimeGrid grid = TimeGrid::uniform(c.grid_size);
  FbmSampler sampler(grid, run.h);
  const MarketParams mp = market_params(c);
  std::vector<double> terminal;
  each_path(run, sampler, [&](std::size_t i, std::uint64_t seed, const FbmPath& path) {
    const MarketPath m = simulate_market(path, mp);
    csv_path_rows(run, i, m);
    double sup = 0.0;
    for (double b : path.values) sup = std::max(sup, std::abs(b));
    json rec;
    rec["index"] = i;
    rec["seed"] = seed;
    rec["terminal"] = path.values.back();
    rec["sup_abs"] = sup;
    run.paths.push_back(rec);
    terminal.push_back(path.values.back());
  });
  run.aggregates["grid_points"] = grid.size();
  if (terminal.size() >= 30) {
    double mean = 0.0, var = 0.0;
    for (double x : terminal) mean += x;
    mean /= double(terminal.size());
    for (double x : terminal) var += (x - mean) * (x - mean);
    var /= double(terminal.size() - 1);
    run.aggregates["terminal_mean"] = mean;
    run.aggregates["terminal_variance"] = var;
    // Var(B_1) = 1; the sample variance has standard error sqrt(2/n)
    const double z = std::abs(var - 1.0) / std::sqrt(2.0 / double(terminal.size()));
    run.verdicts.push_back(make_verdict("terminal variance matches 1", z, 5.0, z <= 5.0, terminal.size(),
                                        "standard errors from 1", c.master_seed));
  }
}

void run_ito_check(Run& run) {
  const auto& c = run.cfg;
  ItoSuiteOptions opt;
  opt.sizes = {c.grid_size / 4, c.grid_size / 2, c.grid_size};
  opt.n_paths = c.ito_paths;
  opt.seed = c.master_seed;
  run.verdicts = ito_residual_suite(run.h, c.alpha_param(), opt);
  run.aggregates["sizes"] = opt.sizes;
}

void run_diverge(Run& run) {
  const auto& c = run.cfg;
  const int n_max = auto_blocks(c, 1.0, c.grid_size);
  const DivergentParams dp(c.gamma, c.beta, n_max, c.points_per_block, c.scale);
  dp.validate(run.h);
  const TimeGrid grid = build_grid({c.grid_size, {}, {divergent_layout(dp)}});
  FbmSampler sampler(grid, run.h);
  const std::vector<int> cps = checkpoints_of(n_max);
  const int window_lo = cps.front();
  std::vector<std::vector<double>> at_cp(cps.size());
  std::size_t triggered = 0, window = 0, violations = 0;

  each_path(run, sampler, [&](std::size_t i, std::uint64_t seed, const FbmPath& path) {
    const DivergentResult r = build_divergent_integrand(path, dp);
    const int realized = int(r.block_indices.size()) - 1;
    json vals = json::array();
    std::vector<double> v(cps.size(), nan);
    for (std::size_t k = 0; k < cps.size(); ++k) {
      if (cps[k] <= realized) {
        v[k] = r.running[r.block_indices[cps[k]]];
        vals.push_back(v[k]);
      } else {
        vals.push_back(nullptr);
      }
    }
    std::size_t trig = 0, win = 0, bad = 0;
    for (const auto& rec : r.records) {
      if (rec.block >= window_lo && rec.block <= n_max) {
        ++win;
        if (rec.triggered) ++trig;
      }
    }
    for (std::size_t k = 1; k < r.block_indices.size(); ++k)
      if (r.running[r.block_indices[k]] < r.running[r.block_indices[k - 1]]) ++bad;
    for (std::size_t k = 0; k < cps.size(); ++k)
      if (!std::isnan(v[k])) at_cp[k].push_back(v[k]);
    triggered += trig;
    window += win;
    violations += bad;

    json rec;
    rec["index"] = i;
    rec["seed"] = seed;
    rec["blocks"] = realized;
    rec["checkpoint_values"] = vals;
    rec["triggered_in_window"] = trig;
    rec["blocks_in_window"] = win;
    rec["decreases"] = bad;
    if (i < c.ledger_paths) rec["records"] = records_json(r.records);
    run.paths.push_back(rec);
    const double last = r.running[r.block_indices.back()];
    csv_terminal_row(run, i, realized == n_max, last, nan);
    if (i < c.ledger_paths) csv_path_rows(run, i, simulate_market(path, market_params(c)));
  });

  std::vector<double> med;
  for (const auto& s : at_cp) med.push_back(safe_median(s));
  double min_step = INFINITY;
  for (std::size_t k = 1; k < med.size(); ++k) min_step = std::min(min_step, med[k] - med[k - 1]);
  if (med.size() < 2) min_step = nan;
  const double frac = fraction(triggered, window);
  run.aggregates["n_max"] = n_max;
  run.aggregates["grid_points"] = grid.size();
  run.aggregates["checkpoints"] = cps;
  run.aggregates["median_checkpoint_values"] = med;
  run.aggregates["triggered_fraction"] = frac;
  run.verdicts.push_back(make_verdict("median running value strictly increasing over checkpoints", min_step, 0.0,
                                      min_step > 0.0, at_cp.back().size(), "smallest step between medians",
                                      c.master_seed));
  run.verdicts.push_back(make_verdict("triggered block fraction over the last three quarters of blocks", frac, 0.9,
                                      frac >= 0.9, window, "", c.master_seed));
  run.verdicts.push_back(make_verdict("running value nondecreasing at block ends", double(violations), 0.0,
                                      violations == 0, c.n_paths, "", c.master_seed));
}

namespace {

// KS for continuous targets, distance to the nearest atom otherwise
TestVerdict law_verdict(const std::string& label, const TargetDistribution& target, const std::vector<double>& x,
                        std::uint64_t seed) {
  if (target.continuous()) {
    const double ks = x.empty() ? 1.0 : ks_statistic(x, [&](double v) { return target.cdf(v); });
    const double thr = std::max(0.05, x.empty() ? 1.0 : ks_threshold(x.size()));
    return make_verdict(label + ": KS distance of resolved terminals", ks, thr, ks < thr, x.size(),
                        "threshold max(0.05, 1.5 * 1.36 / sqrt(n))", seed);
  }
  std::vector<double> atoms;
  if (target.kind() == TargetDistribution::Kind::point) atoms = {target.param(0)};
  else atoms = {target.param(1), target.param(2)};
  double worst = 0.0;
  for (double v : x) {
    double d = INFINITY;
    for (double a : atoms) d = std::min(d, std::abs(v - a));
    worst = std::max(worst, d);
  }
  return make_verdict(label + ": resolved terminals on the target atoms", worst, 0.0, worst == 0.0, x.size(), "",
                      seed);
}

}  // namespace

void run_represent_distribution(Run& run) {
  const auto& c = run.cfg;
  run.h.require_persistent();
  const int n_max = auto_blocks(c, 0.5, c.grid_size);
  const DivergentParams dp(c.gamma, c.beta, n_max, c.points_per_block, c.scale);
  dp.validate(run.h);
  const TargetDistribution target = TargetDistribution::parse(c.target_distribution_spec);
  const MarketParams mp = market_params(c);
  const AlphaParam alpha = c.alpha_param();
  const TimeGrid grid = build_grid({c.grid_size, {0.5}, {distribution_layout(dp)}});
  FbmSampler sampler(grid, run.h);
  std::vector<double> fbm_terminals, market_terminals;
  std::size_t fbm_resolved = 0, market_resolved = 0;
  double hit_gap = 0.0, market_hit_gap = 0.0, book = 0.0;

  each_path(run, sampler, [&](std::size_t i, std::uint64_t seed, const FbmPath& path) {
    const PrescribedResult r = prescribed_distribution_integrand(path, target, dp);
    const MarketPath m = simulate_market(path, mp);
    const PortfolioLedger led = prescribed_terminal_distribution(m, target, dp, alpha);
    const double c1 = led.C.back();
    const double res = led.bookkeeping_residual(m);
    if (r.resolved) {
      ++fbm_resolved;
      fbm_terminals.push_back(r.terminal);
      hit_gap = std::max(hit_gap, std::abs(r.terminal - r.target));
    }
    if (led.resolved) {
      ++market_resolved;
      market_terminals.push_back(c1);
      market_hit_gap = std::max(market_hit_gap, std::abs(c1 - led.target));
    }
    book = std::max(book, res);
    json rec;
    rec["index"] = i;
    rec["seed"] = seed;
    rec["resolved"] = r.resolved;
    rec["terminal"] = r.terminal;
    rec["target"] = r.target;
    rec["tau"] = r.tau;
    rec["market_resolved"] = led.resolved;
    rec["market_terminal"] = c1;
    rec["market_target"] = led.target;
    rec["bookkeeping_residual"] = res;
    if (i < c.ledger_paths) {
      rec["records"] = records_json(r.records);
      csv_path_rows(run, i, m);
      csv_ledger_rows(run, i, led);
    }
    run.paths.push_back(rec);
    csv_terminal_row(run, i, r.resolved, r.terminal, r.target);
  });

  const std::size_t n = c.n_paths - run.path_errors;
  const double f1 = fraction(fbm_resolved, n), f2 = fraction(market_resolved, n);
  run.aggregates["n_max"] = n_max;
  run.aggregates["grid_points"] = grid.size();
  run.aggregates["resolved_fraction"] = f1;
  run.aggregates["market_resolved_fraction"] = f2;
  run.verdicts.push_back(make_verdict("fBm: resolved fraction", f1, 0.99, f1 >= 0.99, n, "", c.master_seed));
  run.verdicts.push_back(law_verdict("fBm", target, fbm_terminals, c.master_seed));
  run.verdicts.push_back(make_verdict("fBm: resolved terminal equals its target", hit_gap, 0.0, hit_gap == 0.0,
                                      fbm_resolved, "", c.master_seed));
  run.verdicts.push_back(make_verdict("market: resolved fraction", f2, 0.99, f2 >= 0.99, n, "", c.master_seed));
  run.verdicts.push_back(law_verdict("market", target, market_terminals, c.master_seed));
  run.verdicts.push_back(make_verdict("market: resolved discounted capital equals its target", market_hit_gap, 0.0,
                                      market_hit_gap == 0.0, market_resolved, "", c.master_seed));
  run.verdicts.push_back(make_verdict("market: ledger bookkeeping residual", book, 1e-12, book <= 1e-12, n, "",
                                      c.master_seed));
}

void run_represent_improper(Run& run) {
  const auto& c = run.cfg;
  run.h.require_persistent();
  const MarketParams mp = market_params(c);
  const ClaimSpec claim = ClaimSpec::parse(c.improper_claim, mp.stock());
  const BlockPartition outer(c.outer_gamma, c.outer_blocks, c.points_per_block);
  const NestedDivergent nested = nested_of(c);
  nested.validate(run.h);
  const TimeGrid grid = build_grid({c.outer_base, claim.marks, {improper_layout(outer, nested)}});
  FbmSampler sampler(grid, run.h);
  std::vector<int> cps;
  std::vector<std::vector<double>> errs;
  double block_gap = 0.0;
  std::size_t sandwich = 0, all_resolved = 0;
  std::vector<double> final_err;

  each_path(run, sampler, [&](std::size_t i, std::uint64_t seed, const FbmPath& path) {
    const auto idx = outer.realize(path.grid);
    const std::vector<double> xi = claim_values_at(claim, path, idx);
    const ImproperResult r = improper_representation(path, xi, outer, nested);
    const double payoff = claim_payoff(claim, path);
    const int n_outer = int(idx.size()) - 1;
    if (cps.empty()) {
      cps = checkpoints_of(n_outer);
      errs.resize(cps.size());
    }
    std::size_t bad = 0;
    for (int n = 0; n < n_outer; ++n) {
      const double from = r.x[idx[n]], to = xi[n];
      const double lo = std::min(from, to), hi = std::max(from, to);
      const double tol = 1e-12 * (1.0 + std::abs(lo) + std::abs(hi));
      for (std::size_t j = idx[n]; j <= idx[n + 1]; ++j)
        if (r.x[j] < lo - tol || r.x[j] > hi + tol) ++bad;
      if (r.resolved[n]) block_gap = std::max(block_gap, std::abs(r.x[idx[n + 1]] - xi[n]));
    }
    sandwich += bad;
    const bool ok = !r.resolved.empty() && std::all_of(r.resolved.begin(), r.resolved.end(), [](bool b) { return b; });
    if (ok) ++all_resolved;
    json errors = json::array();
    for (std::size_t k = 0; k < cps.size(); ++k) {
      const int at = std::min(cps[k], n_outer);
      const double e = std::abs(r.x[idx[at]] - payoff);
      errs[k].push_back(e);
      errors.push_back(e);
    }
    const double terminal = r.x[idx.back()];
    final_err.push_back(std::abs(terminal - payoff));
    json rec;
    rec["index"] = i;
    rec["seed"] = seed;
    rec["resolved"] = ok;
    rec["terminal"] = terminal;
    rec["payoff"] = payoff;
    rec["checkpoint_errors"] = errors;
    rec["sandwich_violations"] = bad;
    if (i < c.ledger_paths) {
      rec["records"] = records_json(r.records);
      csv_path_rows(run, i, simulate_market(path, mp));
    }
    run.paths.push_back(rec);
    csv_terminal_row(run, i, ok, terminal, payoff);
  });

  std::vector<double> med;
  for (const auto& e : errs) med.push_back(safe_median(e));
  double worst_rise = 0.0;
  for (std::size_t k = 1; k < med.size(); ++k) worst_rise = std::max(worst_rise, med[k] - med[k - 1]);
  const double med_final = safe_median(final_err);
  const std::size_t n = c.n_paths - run.path_errors;
  run.aggregates["grid_points"] = grid.size();
  run.aggregates["checkpoints"] = cps;
  run.aggregates["median_checkpoint_errors"] = med;
  run.aggregates["all_blocks_resolved_fraction"] = fraction(all_resolved, n);
  run.verdicts.push_back(make_verdict("resolved outer blocks end exactly at their targets", block_gap, 0.0,
                                      block_gap == 0.0, n, "", c.master_seed));
  run.verdicts.push_back(make_verdict("running value stays between block start and target", double(sandwich), 0.0,
                                      sandwich == 0, n, "", c.master_seed));
  run.verdicts.push_back(make_verdict("median error does not grow over checkpoints", worst_rise, 0.0,
                                      worst_rise <= 0.0, n, "", c.master_seed));
  run.verdicts.push_back(make_verdict("median terminal error", med_final, 0.05, med_final < 0.05, n, "",
                                      c.master_seed));
}

void run_replicate(Run& run) {
  const auto& c = run.cfg;
  run.h.require_persistent();
  const MarketParams mp = market_params(c);
  const ClaimSpec claim = ClaimSpec::parse(c.claim_spec, mp.stock());
  const ReplicationParams rp = replication_params(run, claim);
  const ReplicationSetup setup = replication_setup(c);
  const TimeGrid grid = build_grid({c.replication_base, claim.marks, {replication_layout(rp, setup)}});
  FbmSampler sampler(grid, run.h);
  std::vector<double> rel, case_b, holder;
  double worst_norm = 0.0;

  each_path(run, sampler, [&](std::size_t i, std::uint64_t seed, const FbmPath& path) {
    const ReplicationResult r = replicate_holder_claim(path, claim, rp, setup);
    const double payoff = claim_payoff(claim, path);
    const double e = relative_error(r.terminal, payoff);
    const double fb = case_b_fraction(r.case_log, setup.n_max);
    rel.push_back(e);
    case_b.push_back(fb);
    json rec;
    rec["index"] = i;
    rec["seed"] = seed;
    rec["terminal"] = r.terminal;
    rec["payoff"] = payoff;
    rec["relative_error"] = e;
    rec["case_b_fraction"] = fb;
    if (i < c.ledger_paths) {
      const double norm = norm_1_alpha(r.integrand, 0.0, 1.0, rp.alpha);
      const double est = holder_exponent_estimate(resample_uniform(path.grid, r.running, 12));
      worst_norm = std::max(worst_norm, norm);
      holder.push_back(est);
      rec["integrand_norm"] = norm;
      rec["holder_estimate"] = est;
      rec["records"] = records_json(r.case_log);
      csv_path_rows(run, i, simulate_market(path, mp));
    }
    run.paths.push_back(rec);
    csv_terminal_row(run, i, !r.case_log.empty() && r.case_log.back().triggered, r.terminal, payoff);
  });

  const double med = safe_median(rel);
  double mean_b = 0.0;
  for (double f : case_b) mean_b += f;
  mean_b = case_b.empty() ? nan : mean_b / double(case_b.size());
  const double med_holder = safe_median(holder);
  const double floor = rp.alpha.alpha - 0.1;
  run.aggregates["grid_points"] = grid.size();
  run.aggregates["parameters"] = {{"a", rp.a}, {"alpha", rp.alpha.alpha}, {"gamma", rp.gamma},
                                  {"kappa", rp.kappa}, {"b", rp.b}};
  run.aggregates["median_relative_error"] = med;
  run.aggregates["mean_case_b_fraction"] = mean_b;
  run.verdicts.push_back(make_verdict("median relative terminal error", med, 0.05, med < 0.05, rel.size(), "",
                                      c.master_seed));
  run.verdicts.push_back(make_verdict("Case B fraction on the terminal half of blocks", mean_b, 0.05, mean_b <= 0.05,
                                      case_b.size(), "mean over paths", c.master_seed));
  run.verdicts.push_back(make_verdict("integrand norm below the overflow guard", worst_norm, overflow_guard,
                                      worst_norm < overflow_guard, holder.size(), "first ledger_paths paths",
                                      c.master_seed));
  run.verdicts.push_back(make_verdict("Holder exponent of the capital path", med_holder, floor,
                                      holder.empty() || med_holder >= floor, holder.size(),
                                      "median estimate against alpha - 0.1", c.master_seed));
}

void run_arbitrage(Run& run) {
  const auto& c = run.cfg;
  run.h.require_persistent();
  const MarketParams mp = market_params(c);
  const AlphaParam alpha = c.alpha_param();
  const std::vector<std::size_t> bases{c.grid_size / 4, c.grid_size / 2, c.grid_size};
  std::vector<DivergentParams> params;
  std::vector<FbmSampler> samplers;
  json levels = json::array();
  for (std::size_t base : bases) {
    const int n_max = auto_blocks(c, 0.5, base);
    params.emplace_back(c.gamma, c.beta, n_max, c.points_per_block, c.scale);
    params.back().validate(run.h);
    samplers.emplace_back(build_grid({base, {0.5}, {distribution_layout(params.back())}}), run.h);
    levels.push_back({{"base", base}, {"n_max", n_max}, {"grid_points", samplers.back().grid().size()}});
  }
  std::vector<std::size_t> resolved(bases.size(), 0);
  double worst_v0 = 0.0, worst_shortfall = -INFINITY, book = 0.0;

  // finest level drives the per-path loop; coarser levels reuse the path seed
  each_path(run, samplers.back(), [&](std::size_t i, std::uint64_t seed, const FbmPath& finest) {
    json by_level = json::array();
    for (std::size_t l = 0; l < bases.size(); ++l) {
      const FbmPath path = l + 1 == bases.size() ? finest : samplers[l].sample(seed);
      const MarketPath m = simulate_market(path, mp);
      const PortfolioLedger led = strong_arbitrage_strategy(m, c.arbitrage_c, params[l], alpha);
      by_level.push_back(led.resolved);
      worst_v0 = std::max(worst_v0, std::abs(led.V.front()));
      book = std::max(book, led.bookkeeping_residual(m));
      if (led.resolved) {
        ++resolved[l];
        worst_shortfall = std::max(worst_shortfall, c.arbitrage_c - led.V.back());
      }
      if (l + 1 == bases.size()) {
        json rec;
        rec["index"] = i;
        rec["seed"] = seed;
        rec["resolved"] = led.resolved;
        rec["V0"] = led.V.front();
        rec["V1"] = led.V.back();
        rec["resolved_by_level"] = by_level;
        if (i < c.ledger_paths) {
          rec["records"] = records_json(led.records);
          csv_path_rows(run, i, m);
          csv_ledger_rows(run, i, led);
        }
        run.paths.push_back(rec);
        csv_terminal_row(run, i, led.resolved, led.V.back(), c.arbitrage_c);
      }
    }
  });

  const std::size_t n = c.n_paths - run.path_errors;
  std::vector<double> fr;
  for (std::size_t k : resolved) fr.push_back(fraction(k, n));
  double worst_drop = 0.0;
  for (std::size_t l = 1; l < fr.size(); ++l) worst_drop = std::max(worst_drop, fr[l - 1] - fr[l]);
  run.aggregates["levels"] = levels;
  run.aggregates["resolved_fraction_by_level"] = fr;
  run.verdicts.push_back(make_verdict("initial value is zero", worst_v0, 0.0, worst_v0 == 0.0, n, "", c.master_seed));
  run.verdicts.push_back(make_verdict("terminal value at least c on resolved paths", worst_shortfall, 0.0,
                                      worst_shortfall <= 0.0, resolved.back(), "max of c - V_1", c.master_seed));
  run.verdicts.push_back(make_verdict("resolved fraction on the finest grid", fr.back(), 0.99, fr.back() >= 0.99, n,
                                      "", c.master_seed));
  run.verdicts.push_back(make_verdict("resolved fraction non-decreasing under refinement", worst_drop, 0.0,
                                      worst_drop <= 0.0, n, "", c.master_seed));
  run.verdicts.push_back(make_verdict("ledger bookkeeping residual", book, 1e-12, book <= 1e-12, n, "", c.master_seed));
}

void run_hedge_weak(Run& run) {
  const auto& c = run.cfg;
  run.h.require_persistent();
  const MarketParams mp = market_params(c);
  const AlphaParam alpha = c.alpha_param();
  const ClaimSpec claim = ClaimSpec::parse(c.weak_claim, mp.stock());
  WeakHedgeSetup setup;
  setup.outer = BlockPartition(c.outer_gamma, c.outer_blocks, c.points_per_block);
  setup.nested = nested_of(c);
  setup.nested.validate(run.h);
  const TimeGrid grid = build_grid({c.outer_base, claim.marks, {improper_layout(setup.outer, setup.nested)}});
  FbmSampler sampler(grid, run.h);
  std::vector<std::vector<double>> errs(c.weak_v0s.size());
  double book = 0.0;

  each_path(run, sampler, [&](std::size_t i, std::uint64_t seed, const FbmPath& path) {
    const MarketPath m = simulate_market(path, mp);
    const double payoff = claim_payoff(claim, path);
    json hedges = json::array();
    for (std::size_t k = 0; k < c.weak_v0s.size(); ++k) {
      const PortfolioLedger led = weak_hedge(m, claim, c.weak_v0s[k], setup, alpha);
      const double e = std::abs(led.V.back() - payoff);
      errs[k].push_back(e);
      book = std::max(book, led.bookkeeping_residual(m));
      hedges.push_back({{"v0", c.weak_v0s[k]}, {"V0", led.V.front()}, {"V1", led.V.back()},
                        {"resolved", led.resolved}, {"error", e}});
      if (k == 0) {
        csv_terminal_row(run, i, led.resolved, led.V.back(), payoff);
        if (i < c.ledger_paths) {
          csv_path_rows(run, i, m);
          csv_ledger_rows(run, i, led);
        }
      }
    }
    json rec;
    rec["index"] = i;
    rec["seed"] = seed;
    rec["payoff"] = payoff;
    rec["hedges"] = hedges;
    run.paths.push_back(rec);
  });

  json med = json::array();
  const std::size_t n = c.n_paths - run.path_errors;
  for (std::size_t k = 0; k < c.weak_v0s.size(); ++k) {
    const double m = safe_median(errs[k]);
    med.push_back(m);
    run.verdicts.push_back(make_verdict("median |V_1 - payoff| with v0 = " + fmt17(c.weak_v0s[k]), m, 0.05, m < 0.05,
                                        errs[k].size(), "", c.master_seed));
  }
  run.aggregates["grid_points"] = grid.size();
  run.aggregates["median_errors"] = med;
  run.verdicts.push_back(make_verdict("ledger bookkeeping residual", book, 1e-12, book <= 1e-12, n, "", c.master_seed));
}

void run_hedge_holder(Run& run) {
  const auto& c = run.cfg;
  run.h.require_persistent();
  const MarketParams mp = market_params(c);
  const ClaimSpec claim = ClaimSpec::parse(c.claim_spec, mp.stock());
  const ReplicationParams rp = replication_params(run, claim);
  const ReplicationSetup setup = replication_setup(c);
  const TimeGrid grid = build_grid({c.replication_base, claim.marks, {replication_layout(rp, setup)}});
  FbmSampler sampler(grid, run.h);
  std::vector<std::vector<double>> rel(c.holder_v0s.size());
  std::vector<double> case_b;
  double spread = 0.0, book = 0.0;
  long verbatim = 0, driftless = 0;

  each_path(run, sampler, [&](std::size_t i, std::uint64_t seed, const FbmPath& path) {
    const MarketPath m = simulate_market(path, mp);
    const double payoff = claim_payoff(claim, path);
    json hedges = json::array();
    std::vector<double> v1;
    bool all_resolved = true;
    for (std::size_t k = 0; k < c.holder_v0s.size(); ++k) {
      const PortfolioLedger led = holder_hedge(m, claim, c.holder_v0s[k], rp, setup);
      const double e = relative_error(led.V.back(), payoff);
      rel[k].push_back(e);
      v1.push_back(led.V.back());
      all_resolved = all_resolved && led.resolved;
      book = std::max(book, led.bookkeeping_residual(m));
      verbatim += led.verbatim_rule_changes;
      driftless += led.driftless_rule_changes;
      if (k == 0) case_b.push_back(case_b_fraction(led.records, setup.n_max));
      hedges.push_back({{"v0", c.holder_v0s[k]}, {"V1", led.V.back()}, {"resolved", led.resolved},
                        {"relative_error", e}, {"verbatim_rule_changes", led.verbatim_rule_changes},
                        {"driftless_rule_changes", led.driftless_rule_changes}});
      if (k == 0) {
        csv_terminal_row(run, i, led.resolved, led.V.back(), payoff);
        if (i < c.ledger_paths) {
          csv_path_rows(run, i, m);
          csv_ledger_rows(run, i, led);
        }
      }
    }
    double s = 0.0;
    if (all_resolved)
      for (double v : v1) s = std::max(s, std::abs(v - v1.front()) / (1.0 + std::abs(v1.front())));
    spread = std::max(spread, s);
    json rec;
    rec["index"] = i;
    rec["seed"] = seed;
    rec["payoff"] = payoff;
    rec["all_resolved"] = all_resolved;
    rec["v0_spread"] = s;
    rec["case_b_fraction"] = case_b.back();
    rec["hedges"] = hedges;
    run.paths.push_back(rec);
  });

  const std::size_t n = c.n_paths - run.path_errors;
  json med = json::array();
  for (std::size_t k = 0; k < c.holder_v0s.size(); ++k) {
    const double m = safe_median(rel[k]);
    med.push_back(m);
    run.verdicts.push_back(make_verdict("median relative error of V_1 with v0 = " + fmt17(c.holder_v0s[k]), m, 0.05,
                                        m < 0.05, rel[k].size(), "", c.master_seed));
  }
  double mean_b = 0.0;
  for (double f : case_b) mean_b += f;
  mean_b = case_b.empty() ? nan : mean_b / double(case_b.size());
  run.aggregates["grid_points"] = grid.size();
  run.aggregates["median_relative_errors"] = med;
  run.aggregates["mean_case_b_fraction"] = mean_b;
  run.aggregates["verbatim_rule_changes"] = verbatim;
  run.aggregates["driftless_rule_changes"] = driftless;
  run.verdicts.push_back(make_verdict("V_1 unchanged across initial capitals on resolved paths", spread, 1e-9,
                                      spread <= 1e-9, n, "relative to 1 + |V_1|", c.master_seed));
  run.verdicts.push_back(make_verdict("Case B fraction on the terminal half of blocks", mean_b, 0.05, mean_b <= 0.05,
                                      case_b.size(), "mean over paths, first v0", c.master_seed));
  run.verdicts.push_back(make_verdict("ledger bookkeeping residual", book, 1e-12, book <= 1e-12, n, "", c.master_seed));
}

namespace {

const std::vector<double> small_ball_eps{0.05, 0.1, 0.15, 0.2, 0.25, 0.3};

void small_ball_into(Run& run, const std::string& prefix) {
  const auto& c = run.cfg;
  const SmallBallFit fit = small_ball_fit(run.h, 1.0, small_ball_eps, c.verify_paths, c.master_seed);
  run.aggregates[prefix + "eps"] = fit.eps;
  run.aggregates[prefix + "p_hat"] = fit.p_hat;
  run.aggregates[prefix + "c_each"] = fit.c_each;
  run.aggregates[prefix + "c_hat"] = fit.c_hat;
  run.verdicts.push_back(small_ball_check(run.h, 1.0, small_ball_eps, c.verify_paths, c.master_seed));
}

void sign_lemma_into(Run& run) {
  for (auto& v : sign_change_bound_check(run.h, 20, run.cfg.verify_paths, run.cfg.master_seed))
    run.verdicts.push_back(v);
}

}  // namespace

void run_verify_small_ball(Run& run) { small_ball_into(run, "small_ball_"); }

void run_verify_sign_lemma(Run& run) {
  sign_lemma_into(run);
  run.aggregates["sign_change_constant"] = sign_change_constant(run.h, 20);
  run.aggregates["sign_change_constant_half_region"] = sign_change_constant(run.h, 20, true);
}

void run_verify_all(Run& run) {
  const auto& c = run.cfg;
  run.verdicts.push_back(covariance_check(TimeGrid::uniform(16), run.h, c.verify_paths, c.master_seed));
  small_ball_into(run, "small_ball_");
  run_verify_sign_lemma(run);
  ItoSuiteOptions opt;
  opt.sizes = {c.grid_size / 4, c.grid_size / 2, c.grid_size};
  opt.n_paths = c.ito_paths;
  opt.seed = c.master_seed;
  if (run.h.h > 0.5) {
    for (auto& v : ito_residual_suite(run.h, c.alpha_param(), opt)) run.verdicts.push_back(v);
  }
}

}  // namespace fbmint::detail
