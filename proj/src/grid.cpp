#include "fbmint/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "fbmint/errors.hpp"

namespace fbmint {

double zeta(double gamma) {
  if (!(gamma > 1.0)) throw ArgumentError("zeta needs gamma > 1");
  return std::riemann_zeta(gamma);
}

BlockPartition::BlockPartition(double g, int n, int m, double o, double len)
    : gamma(g), zeta_gamma(zeta(g)), origin(o), length(len), n_max(n), points_per_block(m) {
  if (n < 0) throw ArgumentError("n_max must be nonnegative");
  if (m < 1) throw ArgumentError("points per block must be positive");
  if (!(len > 0.0) || o < 0.0 || o + len > 1.0 + 1e-15) throw ArgumentError("partition must sit inside [0,1]");
  delta.assign(static_cast<std::size_t>(n) + 1, 0.0);
  t.assign(static_cast<std::size_t>(n) + 1, o);
  double acc = 0.0;
  for (int k = 1; k <= n; ++k) {
    delta[k] = std::pow(static_cast<double>(k), -g) / zeta_gamma;
    acc += delta[k];
    t[k] = o + len * acc;
  }
  if (n > 0 && !(t.back() < o + len)) throw ArgumentError("partition truncation reaches the end of its interval");
}

int BlockPartition::blocks_above(double gamma, double length, double min_block) {
  const double z = zeta(gamma);
  return static_cast<int>(std::floor(std::pow(length / (z * min_block), 1.0 / gamma)));
}

std::vector<std::size_t> BlockPartition::realize(const TimeGrid& grid) const {
  std::vector<std::size_t> idx;
  for (double tn : t) {
    const std::size_t i = grid.nearest(tn);
    if (!idx.empty() && i <= idx.back()) break;
    idx.push_back(i);
  }
  return idx;
}

BlockPartition nested_partition(double u, double v, const NestedSpec& spec) {
  return BlockPartition(spec.gamma, spec.k_max, spec.points_per_sub, u, v - u);
}

namespace {

void add_block_points(std::vector<double>& pts, double a, double b, int m) {
  for (int j = 1; j < m; ++j) pts.push_back(a + (b - a) * j / m);
}

// all points implied by the layouts, given a rule to place each point
template <class Snap>
std::vector<double> layout_points(const GridRequest& req, Snap snap) {
  std::vector<double> pts;
  for (const auto& lay : req.layouts) {
    const auto& p = lay.partition;
    std::vector<double> bounds;
    for (double tn : p.t) bounds.push_back(snap(tn));
    pts.insert(pts.end(), bounds.begin(), bounds.end());
    for (std::size_t n = 1; n < bounds.size(); ++n) {
      add_block_points(pts, bounds[n - 1], bounds[n], p.points_per_block);
      if (lay.nested) {
        const BlockPartition inner = nested_partition(bounds[n - 1], bounds[n], *lay.nested);
        std::vector<double> ib;
        for (double s : inner.t) ib.push_back(snap(s));
        pts.insert(pts.end(), ib.begin(), ib.end());
        for (std::size_t k = 1; k < ib.size(); ++k) add_block_points(pts, ib[k - 1], ib[k], inner.points_per_block);
      }
    }
  }
  return pts;
}

}  // namespace

TimeGrid build_grid(const GridRequest& req, GridMode mode) {
  for (double m : req.marks)
    if (!(m >= 0.0 && m <= 1.0)) throw ArgumentError("mark outside [0,1]");

  // marks and partition bounds win over filler points that land within rounding of them
  std::vector<std::pair<double, int>> tagged;
  for (const auto& lay : req.layouts)
    for (double tn : lay.partition.t) tagged.emplace_back(tn, 0);
  for (double x : layout_points(req, [](double x) { return x; })) tagged.emplace_back(x, 1);
  for (std::size_t k = 0; k <= req.base_n; ++k)
    tagged.emplace_back(req.base_n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(req.base_n), 1);
  for (double m : req.marks) tagged.emplace_back(m, 0);
  tagged.emplace_back(0.0, 0);
  std::sort(tagged.begin(), tagged.end());
  std::vector<double> nominal;
  int last_priority = 2;
  for (const auto& [x, pr] : tagged) {
    if (!nominal.empty() && x - nominal.back() < 4e-16) {
      if (pr < last_priority) {
        nominal.back() = x;
        last_priority = pr;
      }
      continue;
    }
    nominal.push_back(x);
    last_priority = pr;
  }
  nominal.front() = 0.0;

  // spacing the layouts ask for; near-coincident points merge when snapped
  double min_gap = req.base_n == 0 ? 1.0 : 1.0 / static_cast<double>(req.base_n);
  for (const auto& lay : req.layouts) {
    const auto& p = lay.partition;
    for (std::size_t n = 1; n < p.t.size(); ++n) {
      const double len = p.t[n] - p.t[n - 1];
      min_gap = std::min(min_gap, len / p.points_per_block);
      if (lay.nested) {
        const BlockPartition inner = nested_partition(p.t[n - 1], p.t[n], *lay.nested);
        for (std::size_t k = 1; k < inner.t.size(); ++k)
          min_gap = std::min(min_gap, (inner.t[k] - inner.t[k - 1]) / inner.points_per_block);
      }
    }
  }

  std::uint64_t res = std::max<std::uint64_t>(1, req.base_n);
  while (min_gap < 4.0 / static_cast<double>(res) && res <= FbmSampler::max_lattice) res *= 2;
  const bool lattice_fits = res <= FbmSampler::max_lattice;

  if (mode == GridMode::automatic) {
    if (nominal.size() <= FbmSampler::auto_cholesky_points || !lattice_fits) {
      mode = GridMode::exact;
    } else {
      mode = GridMode::lattice;
    }
  }

  if (mode == GridMode::lattice) {
    if (!lattice_fits) throw ArgumentError("grid needs a lattice finer than 2^22");
    const double r = static_cast<double>(res);
    auto snap = [r](double x) { return std::round(x * r) / r; };
    std::vector<double> pts = layout_points(req, snap);
    std::vector<std::uint64_t> idx;
    auto push = [&](double x) { idx.push_back(static_cast<std::uint64_t>(std::llround(x * r))); };
    for (double x : pts) push(x);
    for (std::size_t k = 0; k <= req.base_n; ++k) idx.push_back(k * (res / std::max<std::uint64_t>(1, req.base_n)));
    // off-lattice marks fall back to the last lattice point before them
    for (double m : req.marks) idx.push_back(static_cast<std::uint64_t>(std::floor(m * r)));
    idx.push_back(0);
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return TimeGrid::on_lattice(res, std::move(idx));
  }

  if (nominal.size() > FbmSampler::max_cholesky_points) {
    throw ArgumentError("grid needs " + std::to_string(nominal.size()) +
                        " points, above the exact sampler limit");
  }
  return TimeGrid(std::move(nominal));
}

}  // namespace fbmint
