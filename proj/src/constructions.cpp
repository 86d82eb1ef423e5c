#include "fbmint/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fbmint/errors.hpp"

namespace fbmint {

double kernel_value(Kernel k, double beta, double x) {
  if (x == 0.0) return 0.0;
  const double s = x > 0.0 ? 1.0 : -1.0;
  if (k == Kernel::sign) return s;
  return (1.0 + beta) * std::pow(std::abs(x), beta) * s;
}

double kernel_primitive(Kernel k, double beta, double x) {
  if (k == Kernel::sign) return std::abs(x);
  return std::pow(std::abs(x), 1.0 + beta);
}

RunningIntegral::RunningIntegral(const FbmPath& path, Driver driver, double start_value)
    : path_(&path), driver_(std::move(driver)), integrand_(Integrand::zeros(path.grid)),
      running_(path.values.size(), start_value) {
  if (!driver_.drift.empty() && driver_.drift.size() != path.values.size()) {
    throw ArgumentError("drift length differs from the grid");
  }
}

SegmentOutcome RunningIntegral::run(const SegmentSpec& s) {
  const auto& b = path_->values;
  const auto& t = path_->grid.points();
  if (s.start < cursor_) throw ArgumentError("segment starts before the last stop");
  if (s.end <= s.start || s.end >= b.size()) throw ArgumentError("segment bounds outside the grid");
  for (std::size_t i = cursor_ + 1; i <= s.start; ++i) running_[i] = running_[cursor_];
  cursor_ = s.start;

  SegmentOutcome out;
  double v = running_[s.start];
  double side = 0.0;
  if (s.target) {
    if (*s.target == v) {
      out.stop = s.start;
      out.target_hit = true;
      return out;
    }
    side = *s.target > v ? 1.0 : -1.0;
  }
  const bool drift = !driver_.drift.empty();
  const double w = s.direction * s.amp;
  const double centre = b[s.start];
  double g0 = 0.0;
  double phi0 = 0.0;
  for (std::size_t k = s.start; k < s.end; ++k) {
    const double x1 = b[k + 1] - centre;
    const double g1 = kernel_primitive(s.kernel, s.beta, x1);
    const double phi1 = w * kernel_value(s.kernel, s.beta, x1);
    double inc = w * driver_.sigma * (g1 - g0);
    if (drift) inc += 0.5 * (phi0 * driver_.drift[k] + phi1 * driver_.drift[k + 1]) * (t[k + 1] - t[k]);
    const double nv = v + inc;
    if (s.target && side * (nv - *s.target) >= 0.0) {
      const double factor = (*s.target - v) / inc;
      integrand_.add_close({k, factor * phi0, factor * phi1, factor});
      running_[k + 1] = *s.target;
      cursor_ = k + 1;
      out.stop = k + 1;
      out.target_hit = true;
      return out;
    }
    running_[k + 1] = nv;
    const bool crossed = std::abs(x1) >= s.threshold;
    if (crossed || k + 1 == s.end) {
      integrand_.add_close({k, phi0, phi1, 1.0});
      cursor_ = k + 1;
      out.stop = k + 1;
      out.threshold_hit = crossed;
      return out;
    }
    integrand_.values[k + 1] = phi1;
    v = nv;
    g0 = g1;
    phi0 = phi1;
  }
  return out;
}

std::pair<Integrand, std::vector<double>> RunningIntegral::finish() {
  for (std::size_t i = cursor_ + 1; i < running_.size(); ++i) running_[i] = running_[cursor_];
  cursor_ = running_.size() - 1;
  return {integrand_, running_};
}

std::string to_string(CaseLabel c) {
  switch (c) {
    case CaseLabel::A:
      return "A";
    case CaseLabel::B:
      return "B";
    default:
      return "none";
  }
}

DivergentParams::DivergentParams(double g, double b, int n_max, int m, double sc)
    : gamma(g), beta(b), partition(g, n_max, m), scale(sc) {}

namespace {

void check_divergent_window(HurstParam h, double gamma, double beta, double scale) {
  h.require_persistent();
  if (!(gamma > 1.0 && gamma < 1.0 / h.h)) {
    throw ConfigError("gamma outside (1, 1/H): gamma=" + std::to_string(gamma) + ", H=" + std::to_string(h.h));
  }
  const double top = 1.0 / (gamma * h.h) - 1.0;
  if (!(beta > 0.0 && beta < top)) {
    throw ConfigError("beta outside (0, 1/(gamma*H)-1): beta=" + std::to_string(beta) +
                      ", upper=" + std::to_string(top));
  }
  if (!(scale > 0.0)) throw ConfigError("divergent scale must be positive");
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void DivergentParams::validate(HurstParam h) const {
  check_divergent_window(h, gamma, beta, scale);
  if (partition.gamma != gamma) throw ConfigError("partition gamma differs from divergent gamma");
}

void NestedDivergent::validate(HurstParam h) const {
  check_divergent_window(h, spec.gamma, beta, scale);
  if (spec.k_max < 1 || spec.points_per_sub < 1) throw ConfigError("nested partition needs blocks and points");
}

TargetRun drive_to_target(RunningIntegral& acc, const BlockPartition& part, double beta, double scale,
                          double target, std::vector<StoppingRecord>* log, std::size_t last_index) {
  const FbmPath& path = acc.path();
  const double h = path.hurst.h;
  const auto& t = path.grid.points();
  std::vector<std::size_t> idx = part.realize(path.grid);
  while (!idx.empty() && idx.back() > last_index) idx.pop_back();

  const double amp = scale * std::pow(part.length, -h * (1.0 + beta));
  const double thr_scale = std::pow(part.length, h);
  TargetRun r;
  r.stop = acc.cursor();
  if (acc.value() == target) {
    r.resolved = true;
    return r;
  }
  for (std::size_t n = 1; n < idx.size(); ++n) {
    if (idx[n - 1] < acc.cursor()) continue;
    const double dir = sgn(target - acc.value());
    SegmentSpec seg;
    seg.start = idx[n - 1];
    seg.end = idx[n];
    seg.kernel = Kernel::power;
    seg.beta = beta;
    seg.amp = amp;
    seg.direction = dir;
    seg.threshold = std::pow(static_cast<double>(n), -1.0 / (1.0 + beta)) * thr_scale;
    seg.target = target;
    const SegmentOutcome out = acc.run(seg);
    if (log) {
      log->push_back({static_cast<int>(n), t[out.stop], out.stop, out.threshold_hit || out.target_hit,
                      CaseLabel::none});
    }
    r.blocks_used = static_cast<int>(n);
    r.stop = out.stop;
    if (out.target_hit) {
      r.resolved = true;
      return r;
    }
  }
  r.stop = acc.cursor();
  return r;
}

DivergentResult build_divergent_integrand(const FbmPath& path, const DivergentParams& params) {
  params.validate(path.hurst);
  const auto& t = path.grid.points();
  DivergentResult res;
  res.block_indices = params.partition.realize(path.grid);
  RunningIntegral acc(path);
  const auto& idx = res.block_indices;
  for (std::size_t n = 1; n < idx.size(); ++n) {
    SegmentSpec seg;
    seg.start = idx[n - 1];
    seg.end = idx[n];
    seg.kernel = Kernel::power;
    seg.beta = params.beta;
    seg.amp = params.scale;
    seg.threshold = std::pow(static_cast<double>(n), -1.0 / (1.0 + params.beta));
    const SegmentOutcome out = acc.run(seg);
    res.records.push_back({static_cast<int>(n), t[out.stop], out.stop, out.threshold_hit, CaseLabel::none});
  }
  auto [f, run] = acc.finish();
  res.integrand = std::move(f);
  res.running = std::move(run);
  return res;
}

std::vector<std::pair<double, double>> divergence_profile(const FbmPath& path, const DivergentParams& params) {
  const DivergentResult r = build_divergent_integrand(path, params);
  std::vector<std::pair<double, double>> out;
  for (std::size_t i : r.block_indices) out.emplace_back(path.grid[i], r.running[i]);
  return out;
}

PartitionLayout divergent_layout(const DivergentParams& params) { return {params.partition, std::nullopt}; }

BlockPartition half_partition(const DivergentParams& params) {
  return BlockPartition(params.gamma, params.partition.n_max, params.partition.points_per_block, 0.5, 0.5);
}

PartitionLayout distribution_layout(const DivergentParams& params) {
  return {half_partition(params), std::nullopt};
}

PrescribedResult prescribed_distribution_integrand(const FbmPath& path,
                                                   const std::function<double(double)>& transport,
                                                   const DivergentParams& params, const Driver& driver) {
  params.validate(path.hurst);
  const std::size_t half = path.grid.index_of(0.5);
  PrescribedResult res;
  res.target = transport(path.values[half]);
  if (!std::isfinite(res.target)) throw ArgumentError("transported target is not finite");
  RunningIntegral acc(path, driver);
  const BlockPartition part = half_partition(params);
  const TargetRun run = drive_to_target(acc, part, params.beta, params.scale, res.target, &res.records);
  res.resolved = run.resolved;
  res.tau_index = run.resolved ? run.stop : path.grid.size() - 1;
  res.tau = path.grid[res.tau_index];
  auto [f, r] = acc.finish();
  res.integrand = std::move(f);
  res.running = std::move(r);
  res.terminal = res.running.back();
  return res;
}

PrescribedResult prescribed_distribution_integrand(const FbmPath& path, const TargetDistribution& target,
                                                   const DivergentParams& params, const Driver& driver) {
  const HurstParam h = path.hurst;
  return prescribed_distribution_integrand(
      path, [&](double x) { return transport_to_target(target, x, h); }, params, driver);
}

ImproperResult improper_representation(const FbmPath& path, const std::vector<double>& xi,
                                       const BlockPartition& outer, const NestedDivergent& nested,
                                       const Driver& driver, double start_value) {
  nested.validate(path.hurst);
  const auto& t = path.grid.points();
  ImproperResult res;
  res.outer_indices = outer.realize(path.grid);
  const auto& idx = res.outer_indices;
  const std::size_t blocks = idx.size() - 1;
  if (xi.size() < blocks) throw ArgumentError("approximator shorter than the realized outer partition");
  RunningIntegral acc(path, driver, start_value);
  for (std::size_t n = 0; n < blocks; ++n) {
    const BlockPartition inner = nested_partition(t[idx[n]], t[idx[n + 1]], nested.spec);
    const TargetRun run = drive_to_target(acc, inner, nested.beta, nested.scale, xi[n], nullptr, idx[n + 1]);
    res.resolved.push_back(run.resolved);
    res.records.push_back({static_cast<int>(n), t[run.stop], run.stop, run.resolved, CaseLabel::none});
  }
  auto [f, x] = acc.finish();
  res.integrand = std::move(f);
  res.x = std::move(x);
  return res;
}

std::vector<double> approximator_at_blocks(const FbmPath& path, const BlockPartition& outer,
                                           const std::function<double(const FbmPath&, std::size_t)>& z) {
  std::vector<double> xi;
  for (std::size_t i : outer.realize(path.grid)) xi.push_back(z(path, i));
  return xi;
}

PartitionLayout improper_layout(const BlockPartition& outer, const NestedDivergent& nested) {
  return {outer, nested.spec};
}

void ReplicationParams::validate(HurstParam h) const {
  h.require_persistent();
  const double H = h.h;
  if (!(a > 0.0)) throw ConfigError("Holder exponent a must be positive");
  const double al = alpha.alpha;
  const double a_top = std::min(1.0 - H + a, 0.5);
  if (!(al > 1.0 - H && al < a_top)) throw ConfigError("alpha outside (1-H, min(1-H+a, 1/2))");
  if (!(1.0 - al - H + a > 0.0) || !(gamma > 1.0 / (1.0 - al - H + a))) {
    throw ConfigError("gamma not above 1/(1-alpha-H+a)");
  }
  const double k_lo = gamma * (H - a);
  const double k_hi = gamma * (1.0 - al) - 1.0;
  if (!(k_lo < k_hi)) throw ConfigError("empty kappa window: gamma(H-a) >= gamma(1-alpha)-1");
  if (!(kappa > k_lo && kappa < k_hi)) throw ConfigError("kappa outside (gamma(H-a), gamma(1-alpha)-1)");
  if (!(b > H - kappa / gamma && b < a)) throw ConfigError("b outside (H-kappa/gamma, a)");
}

ReplicationParams choose_replication_params(HurstParam h, double a) {
  if (!(a > 0.0)) throw ArgumentError("Holder exponent a must be positive");
  h.require_persistent();
  const double H = h.h;
  ReplicationParams p;
  p.a = std::min(a, H - 1e-3 * H);
  const double lo = 1.0 - H;
  const double hi = std::min(1.0 - H + p.a, 0.5);
  p.alpha = AlphaParam(0.5 * (lo + hi));
  const double al = p.alpha.alpha;
  p.gamma = 2.0 / (1.0 - al - H + p.a);
  p.kappa = 0.5 * (p.gamma * (H - p.a) + p.gamma * (1.0 - al) - 1.0);
  p.b = 0.5 * (H - p.kappa / p.gamma + p.a);
  p.validate(h);
  return p;
}

PartitionLayout replication_layout(const ReplicationParams& params, const ReplicationSetup& setup) {
  return {BlockPartition(params.gamma, setup.n_max, setup.points_per_block), setup.fallback.spec};
}

namespace {

// first index in (s, e] where the condition holds, e + 1 if none
template <class Cond>
std::size_t first_hit(std::size_t s, std::size_t e, Cond cond) {
  for (std::size_t j = s + 1; j <= e; ++j)
    if (cond(j)) return j;
  return e + 1;
}

}  // namespace

ReplicationResult replicate_sequence(const FbmPath& path, const std::vector<double>& xi,
                                     const ReplicationParams& params, const ReplicationSetup& setup,
                                     const Driver& driver, double start_value, int amp_offset) {
  params.validate(path.hurst);
  setup.fallback.validate(path.hurst);
  const auto& t = path.grid.points();
  const auto& bv = path.values;
  ReplicationResult res;
  const BlockPartition part(params.gamma, setup.n_max, setup.points_per_block);
  res.block_indices = part.realize(path.grid);
  const auto& idx = res.block_indices;
  const std::size_t blocks = idx.size() - 1;
  if (xi.size() < blocks) throw ArgumentError("approximator shorter than the realized partition");
  res.xi = xi;
  RunningIntegral acc(path, driver, start_value);
  const bool drift = !driver.drift.empty();

  for (std::size_t k = 1; k <= blocks; ++k) {
    const std::size_t s = idx[k - 1];
    const std::size_t e = idx[k];
    if (k == 1) {
      res.case_log.push_back({1, t[s], s, false, CaseLabel::none});
      continue;
    }
    const double target = xi[k - 1];
    const double prev = xi[k - 2];
    const double v = acc.value();
    if (v == prev) {
      if (target == v) {
        res.case_log.push_back({static_cast<int>(k), t[s], s, true, CaseLabel::A});
        continue;
      }
      const double amp = std::pow(static_cast<double>(static_cast<int>(k) - amp_offset), params.kappa);
      SegmentSpec seg;
      seg.start = s;
      seg.end = e;
      seg.kernel = Kernel::sign;
      seg.amp = amp;
      seg.direction = sgn(target - v);
      seg.target = target;
      const SegmentOutcome out = acc.run(seg);
      res.case_log.push_back({static_cast<int>(k), t[out.stop], out.stop, out.target_hit, CaseLabel::A});
      if (drift) {
        const double level = std::abs(target - v);
        const std::size_t actual = out.target_hit ? out.stop : e + 1;
        std::vector<double> d(e - s + 1, 0.0);  // int_s^t (mu - r) sign(B - B_s) du
        for (std::size_t j = s + 1; j <= e; ++j) {
          d[j - s] = d[j - s - 1] + 0.5 *
                                        (driver.drift[j - 1] * sgn(bv[j - 1] - bv[s]) +
                                         driver.drift[j] * sgn(bv[j] - bv[s])) *
                                        (t[j] - t[j - 1]);
        }
        const std::size_t verbatim = first_hit(s, e, [&](std::size_t j) {
          return amp * std::abs(d[j - s] + driver.sigma * (bv[j] - bv[s])) >= level;
        });
        const std::size_t driftless =
            first_hit(s, e, [&](std::size_t j) { return amp * driver.sigma * std::abs(bv[j] - bv[s]) >= level; });
        res.verbatim_rule_changes += verbatim != actual;
        res.driftless_rule_changes += driftless != actual;
      }
    } else {
      const BlockPartition inner = nested_partition(t[s], t[e], setup.fallback.spec);
      const TargetRun run =
          drive_to_target(acc, inner, setup.fallback.beta, setup.fallback.scale, target, nullptr, e);
      res.case_log.push_back({static_cast<int>(k), t[run.stop], run.stop, run.resolved, CaseLabel::B});
    }
  }
  auto [f, r] = acc.finish();
  res.integrand = std::move(f);
  res.running = std::move(r);
  res.terminal = res.running.back();
  return res;
}

ReplicationResult replicate_holder_claim(const FbmPath& path, const ClaimSpec& claim,
                                         const ReplicationParams& params, const ReplicationSetup& setup) {
  const BlockPartition part(params.gamma, setup.n_max, setup.points_per_block);
  const std::vector<double> xi = claim_values_at(claim, path, part.realize(path.grid));
  return replicate_sequence(path, xi, params, setup);
}

double case_b_fraction(const std::vector<StoppingRecord>& log, int n_blocks) {
  const int from = (n_blocks + 1) / 2;
  int total = 0;
  int b = 0;
  for (const auto& r : log) {
    if (r.block < from || r.block > n_blocks || r.case_label == CaseLabel::none) continue;
    ++total;
    b += r.case_label == CaseLabel::B;
  }
  return total == 0 ? 0.0 : static_cast<double>(b) / total;
}

}  // namespace fbmint
