#include "fbmint/fbm.hpp"

#include <fftw3.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <utility>

#include "fbmint/errors.hpp"

namespace fbmint {

HurstParam::HurstParam(double value) : h(value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw ArgumentError("Hurst parameter must lie in (0,1), got " + std::to_string(value));
  }
}

void HurstParam::require_persistent() const {
  if (!(h > 0.5)) {
    throw ArgumentError("construction needs H > 1/2, got " + std::to_string(h));
  }
}

TimeGrid::TimeGrid() : points_{0.0} {}

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty() || points_.front() != 0.0) {
    throw ArgumentError("time grid must start at 0");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i] > points_[i - 1])) {
      throw ArgumentError("time grid must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
  if (points_.back() > 1.0) throw ArgumentError("time grid must stay inside [0,1]");
}

TimeGrid TimeGrid::uniform(std::size_t n) {
  if (n == 0) return TimeGrid();
  std::vector<std::uint64_t> idx(n + 1);
  for (std::size_t k = 0; k <= n; ++k) idx[k] = k;
  return on_lattice(n, std::move(idx));
}

TimeGrid TimeGrid::on_lattice(std::uint64_t resolution, std::vector<std::uint64_t> indices) {
  if (resolution == 0) throw ArgumentError("lattice resolution must be positive");
  std::vector<double> pts(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] > resolution) throw ArgumentError("lattice index beyond 1");
    pts[i] = static_cast<double>(indices[i]) / static_cast<double>(resolution);
  }
  TimeGrid g(std::move(pts));
  g.resolution_ = resolution;
  g.lattice_ = std::move(indices);
  return g;
}

std::size_t TimeGrid::index_of(double t) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), t);
  if (it == points_.end() || *it != t) {
    std::ostringstream os;
    os.precision(17);
    os << "time " << t << " is not a grid point";
    throw ArgumentError(os.str());
  }
  return static_cast<std::size_t>(it - points_.begin());
}

std::size_t TimeGrid::last_at_or_before(double t) const {
  if (t < 0.0) throw ArgumentError("negative time");
  auto it = std::upper_bound(points_.begin(), points_.end(), t);
  return static_cast<std::size_t>(it - points_.begin()) - 1;
}

std::size_t TimeGrid::nearest(double t) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), t);
  if (it == points_.begin()) return 0;
  if (it == points_.end()) return points_.size() - 1;
  std::size_t hi = static_cast<std::size_t>(it - points_.begin());
  return (t - points_[hi - 1] <= points_[hi] - t) ? hi - 1 : hi;
}

double fbm_covariance(double s, double t, HurstParam h) {
  if (!(s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0)) {
    throw ArgumentError("covariance arguments must lie in [0,1]");
  }
  const double p = 2.0 * h.h;
  return 0.5 * (std::pow(s, p) + std::pow(t, p) - std::pow(std::fabs(s - t), p));
}

namespace {

// Gauss-Legendre nodes and weights on [0,1]
constexpr std::array<double, 2> gl2_x{0.21132486540518711775, 0.78867513459481288225};
constexpr std::array<double, 2> gl2_w{0.5, 0.5};
constexpr std::array<double, 4> gl4_x{0.06943184420297371239, 0.33000947820757186760,
                                      0.66999052179242813240, 0.93056815579702628761};
constexpr std::array<double, 4> gl4_w{0.17392742256872692869, 0.32607257743127307131,
                                      0.32607257743127307131, 0.17392742256872692869};

template <std::size_t Q>
double mixed_difference_gl(double gap, double d1, double d2, double p,
                           const std::array<double, Q>& x, const std::array<double, Q>& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < Q; ++i) {
    for (std::size_t j = 0; j < Q; ++j) {
      acc += w[i] * w[j] * std::pow(gap + x[i] * d1 + x[j] * d2, p - 2.0);
    }
  }
  return 0.5 * p * (p - 1.0) * d1 * d2 * acc;
}

}  // namespace

long double increment_covariance(long double a1, long double b1, long double a2, long double b2,
                                 double h) {
  const long double p = 2.0L * h;
  if (a1 == a2 && b1 == b2) return std::pow(b1 - a1, p);
  if (a2 < a1) {
    std::swap(a1, a2);
    std::swap(b1, b2);
  }
  if (b1 > a2) {
    // overlapping increments, direct formula
    auto g = [p](long double z) { return std::pow(std::fabs(z), p); };
    return 0.5L * (g(b2 - a1) + g(a2 - b1) - g(b2 - b1) - g(a2 - a1));
  }
  const long double gap = a2 - b1;
  const long double d1 = b1 - a1;
  const long double d2 = b2 - a2;
  const long double dmax = std::max(d1, d2);
  if (gap < 32.0L * dmax) {
    auto g = [p](long double z) { return z == 0.0L ? 0.0L : std::pow(z, p); };
    return 0.5L * (g(gap + d1 + d2) + g(gap) - g(gap + d1) - g(gap + d2));
  }
  const double pd = static_cast<double>(p);
  if (gap >= 1.0e4L * dmax) {
    return mixed_difference_gl(static_cast<double>(gap), static_cast<double>(d1),
                               static_cast<double>(d2), pd, gl2_x, gl2_w);
  }
  return mixed_difference_gl(static_cast<double>(gap), static_cast<double>(d1),
                             static_cast<double>(d2), pd, gl4_x, gl4_w);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(master ^ mix(index + 0x632BE59BD9B4E019ULL));
}

struct FbmSampler::Cholesky {
  Eigen::MatrixXd lower;     // factor of the increment correlation matrix
  Eigen::VectorXd scale;     // increment standard deviations
};

struct FbmSampler::Circulant {
  std::size_t steps = 0;     // lattice steps to simulate
  std::size_t length = 0;    // embedding length
  double step_scale = 1.0;   // (1/R)^H
  std::vector<double> root;  // sqrt(eigenvalue / length)
  fftw_complex* buffer = nullptr;
  fftw_plan plan = nullptr;
  std::vector<double> cumulative;

  ~Circulant() {
    if (plan) fftw_destroy_plan(plan);
    if (buffer) fftw_free(buffer);
  }
};

namespace {

std::size_t failing_minor(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) return static_cast<std::size_t>(j + 1);
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return static_cast<std::size_t>(n);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

FbmSampler::FbmSampler(TimeGrid grid, HurstParam h, SamplerMethod method)
    : grid_(std::move(grid)), hurst_(h), method_(method) {
  const std::size_t n = grid_.size() - 1;  // number of increments
  if (method_ == SamplerMethod::automatic) {
    if (grid_.has_lattice() && grid_.resolution() <= max_lattice &&
        (n + 1 > auto_cholesky_points || n + 1 > max_cholesky_points)) {
      method_ = SamplerMethod::circulant;
    } else {
      method_ = SamplerMethod::cholesky;
    }
  }
  if (n == 0) return;

  if (method_ == SamplerMethod::circulant) {
    if (!grid_.has_lattice()) throw ArgumentError("circulant sampler needs a lattice grid");
    if (grid_.resolution() > max_lattice) throw ArgumentError("lattice too fine for circulant sampler");
    circ_ = std::make_unique<Circulant>();
    auto& c = *circ_;
    c.steps = static_cast<std::size_t>(grid_.lattice_indices().back());
    c.length = 2 * next_pow2(std::max<std::size_t>(c.steps, 2));
    c.step_scale = std::pow(1.0 / static_cast<double>(grid_.resolution()), h.h);
    const std::size_t half = c.length / 2;
    const double p = 2.0 * h.h;
    auto r = [p](double k) {
      return 0.5 * (std::pow(k + 1.0, p) - 2.0 * std::pow(k, p) + std::pow(std::fabs(k - 1.0), p));
    };
    c.buffer = fftw_alloc_complex(c.length);
    c.plan = fftw_plan_dft_1d(static_cast<int>(c.length), c.buffer, c.buffer, FFTW_FORWARD,
                              FFTW_ESTIMATE);
    for (std::size_t k = 0; k < c.length; ++k) {
      const std::size_t lag = k <= half ? k : c.length - k;
      c.buffer[k][0] = r(static_cast<double>(lag));
      c.buffer[k][1] = 0.0;
    }
    fftw_execute(c.plan);
    c.root.resize(c.length);
    for (std::size_t k = 0; k < c.length; ++k) {
      double lam = c.buffer[k][0];
      if (lam < 0.0) {
        // tiny negative values are rounding; anything else means the embedding failed
        if (lam < -1e-8) throw GenerationError("circulant embedding has a negative eigenvalue", k);
        lam = 0.0;
      }
      c.root[k] = std::sqrt(lam / static_cast<double>(c.length));
    }
    c.cumulative.resize(c.steps + 1);
    return;
  }

  if (grid_.size() > max_cholesky_points) {
    throw ArgumentError("grid has " + std::to_string(grid_.size()) +
                        " points, above the exact sampler limit");
  }
  chol_ = std::make_unique<Cholesky>();
  const auto& t = grid_.points();
  Eigen::MatrixXd corr(n, n);
  Eigen::VectorXd sd(n);
  for (std::size_t i = 0; i < n; ++i) {
    sd(i) = std::sqrt(static_cast<double>(
        increment_covariance(t[i], t[i + 1], t[i], t[i + 1], h.h)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    corr(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c =
          static_cast<double>(increment_covariance(t[i], t[i + 1], t[j], t[j + 1], h.h)) /
          (sd(i) * sd(j));
      corr(i, j) = c;
      corr(j, i) = c;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * corr.trace() / static_cast<double>(n);
    corr.diagonal().array() += jitter;
    jittered_ = true;
    llt.compute(corr);
    if (llt.info() != Eigen::Success) {
      const std::size_t minor = failing_minor(corr);
      throw GenerationError("increment covariance not positive definite at leading minor " +
                                std::to_string(minor),
                            minor);
    }
  }
  chol_->lower = llt.matrixL();
  chol_->scale = sd;
}

FbmSampler::~FbmSampler() = default;
FbmSampler::FbmSampler(FbmSampler&&) noexcept = default;
FbmSampler& FbmSampler::operator=(FbmSampler&&) noexcept = default;

FbmPath FbmSampler::sample(std::uint64_t seed) {
  FbmPath out{grid_, std::vector<double>(grid_.size(), 0.0), hurst_, seed};
  const std::size_t n = grid_.size() - 1;
  if (n == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  if (chol_) {
    Eigen::VectorXd z(n);
    for (std::size_t i = 0; i < n; ++i) z(i) = normal(rng);
    Eigen::VectorXd inc = chol_->lower.triangularView<Eigen::Lower>() * z;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += inc(i) * chol_->scale(i);
      out.values[i + 1] = acc;
    }
    return out;
  }

  auto& c = *circ_;
  for (std::size_t k = 0; k < c.length; ++k) {
    const double re = normal(rng);
    const double im = normal(rng);
    c.buffer[k][0] = c.root[k] * re;
    c.buffer[k][1] = c.root[k] * im;
  }
  fftw_execute(c.plan);
  c.cumulative[0] = 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < c.steps; ++k) {
    acc += c.buffer[k][0];
    c.cumulative[k + 1] = acc * c.step_scale;
  }
  const auto& idx = grid_.lattice_indices();
  for (std::size_t i = 0; i < idx.size(); ++i) out.values[i] = c.cumulative[idx[i]];
  return out;
}

FbmPath generate_fbm(const TimeGrid& grid, HurstParam h, std::uint64_t seed, SamplerMethod method) {
  FbmSampler sampler(grid, h, method);
  return sampler.sample(seed);
}

namespace {

std::vector<double> checked_new_points(const FbmPath& path, const std::vector<double>& new_points) {
  std::vector<double> pts = new_points;
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!(pts[i] > 0.0 && pts[i] <= 1.0)) throw ArgumentError("new points must lie in (0,1]");
    if (i > 0 && pts[i] == pts[i - 1]) throw ArgumentError("new points contain duplicates");
    const auto& g = path.grid.points();
    if (std::binary_search(g.begin(), g.end(), pts[i])) {
      throw ArgumentError("new point overlaps the existing grid");
    }
  }
  return pts;
}

}  // namespace

ConditionalLaw conditional_law(const FbmPath& path, const std::vector<double>& new_points) {
  ConditionalLaw law;
  law.new_points = checked_new_points(path, new_points);
  const std::size_t m = law.new_points.size();
  law.mean.assign(m, 0.0);
  law.covariance.assign(m, std::vector<double>(m, 0.0));
  if (m == 0) return law;

  // B_0 = 0 carries no information; condition on the other revealed values
  const auto& g = path.grid.points();
  const std::size_t k = g.size() - 1;
  Eigen::MatrixXd s11(k, k), s21(m, k), s22(m, m);
  Eigen::VectorXd x(k);
  for (std::size_t i = 0; i < k; ++i) {
    x(i) = path.values[i + 1];
    for (std::size_t j = 0; j < k; ++j) s11(i, j) = fbm_covariance(g[i + 1], g[j + 1], path.hurst);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) s21(i, j) = fbm_covariance(law.new_points[i], g[j + 1], path.hurst);
    for (std::size_t j = 0; j < m; ++j) {
      s22(i, j) = fbm_covariance(law.new_points[i], law.new_points[j], path.hurst);
    }
  }
  Eigen::VectorXd mean(m);
  Eigen::MatrixXd cov = s22;
  if (k > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s11);
    mean = s21 * ldlt.solve(x);
    cov -= s21 * ldlt.solve(s21.transpose());
  } else {
    mean.setZero();
  }
  for (std::size_t i = 0; i < m; ++i) {
    law.mean[i] = mean(i);
    for (std::size_t j = 0; j < m; ++j) law.covariance[i][j] = 0.5 * (cov(i, j) + cov(j, i));
  }
  return law;
}

FbmPath conditional_extension(const FbmPath& path, const std::vector<double>& new_points,
                              std::uint64_t seed) {
  if (new_points.empty()) return path;
  const ConditionalLaw law = conditional_law(path, new_points);
  const std::size_t m = law.new_points.size();
  Eigen::MatrixXd cov(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) cov(i, j) = law.covariance[i][j];
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov.diagonal().array() += 1e-12 * cov.trace() / static_cast<double>(m);
    llt.compute(cov);
    if (llt.info() != Eigen::Success) {
      const std::size_t minor = failing_minor(cov);
      throw GenerationError("conditional covariance not positive definite at leading minor " +
                                std::to_string(minor),
                            minor);
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(m);
  for (std::size_t i = 0; i < m; ++i) z(i) = normal(rng);
  Eigen::VectorXd draw = llt.matrixL() * z;

  std::vector<std::pair<double, double>> merged;
  merged.reserve(path.grid.size() + m);
  for (std::size_t i = 0; i < path.grid.size(); ++i) merged.emplace_back(path.grid[i], path.values[i]);
  for (std::size_t i = 0; i < m; ++i) merged.emplace_back(law.new_points[i], law.mean[i] + draw(i));
  std::sort(merged.begin(), merged.end());
  std::vector<double> pts, vals;
  for (auto& [t, v] : merged) {
    pts.push_back(t);
    vals.push_back(v);
  }
  return FbmPath{TimeGrid(std::move(pts)), std::move(vals), path.hurst, seed};
}

}  // namespace fbmint
