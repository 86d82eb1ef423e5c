#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace fbmint {

struct HurstParam {
  double h = 0.7;

  HurstParam() = default;
  explicit HurstParam(double value);

  // constructions only make sense for persistent paths
  void require_persistent() const;
};

// Strictly increasing points of [0,1] starting at 0. A grid may remember that
// every point is k/R for an integer lattice R; the fast sampler uses that.
class TimeGrid {
 public:
  TimeGrid();
  explicit TimeGrid(std::vector<double> points);

  static TimeGrid uniform(std::size_t n);
  static TimeGrid on_lattice(std::uint64_t resolution, std::vector<std::uint64_t> indices);

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double back() const { return points_.back(); }

  bool has_lattice() const { return resolution_ != 0; }
  std::uint64_t resolution() const { return resolution_; }
  const std::vector<std::uint64_t>& lattice_indices() const { return lattice_; }

  // index of a point that must be on the grid (exact match)
  std::size_t index_of(double t) const;
  // largest i with points[i] <= t
  std::size_t last_at_or_before(double t) const;
  std::size_t nearest(double t) const;

  bool operator==(const TimeGrid& other) const { return points_ == other.points_; }

 private:
  std::vector<double> points_;
  std::uint64_t resolution_ = 0;
  std::vector<std::uint64_t> lattice_;
};

struct FbmPath {
  TimeGrid grid;
  std::vector<double> values;
  HurstParam hurst;
  std::uint64_t seed = 0;

  double at(double t) const { return values[grid.index_of(t)]; }
};

double fbm_covariance(double s, double t, HurstParam h);

// covariance of the increments over [a1,b1] and [a2,b2]; stable when the
// increments are short compared to their distance
long double increment_covariance(long double a1, long double b1, long double a2, long double b2,
                                 double h);

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

enum class SamplerMethod { automatic, cholesky, circulant };

// Factorizes once, then draws any number of paths on the same grid.
class FbmSampler {
 public:
  FbmSampler(TimeGrid grid, HurstParam h, SamplerMethod method = SamplerMethod::automatic);
  ~FbmSampler();
  FbmSampler(FbmSampler&&) noexcept;
  FbmSampler& operator=(FbmSampler&&) noexcept;

  FbmPath sample(std::uint64_t seed);

  SamplerMethod method() const { return method_; }
  bool jittered() const { return jittered_; }
  const TimeGrid& grid() const { return grid_; }

  static constexpr std::size_t max_cholesky_points = 6000;
  static constexpr std::uint64_t max_lattice = std::uint64_t{1} << 22;
  static constexpr std::size_t auto_cholesky_points = 2500;

 private:
  struct Cholesky;
  struct Circulant;

  TimeGrid grid_;
  HurstParam hurst_;
  SamplerMethod method_;
  bool jittered_ = false;
  std::unique_ptr<Cholesky> chol_;
  std::unique_ptr<Circulant> circ_;
};

FbmPath generate_fbm(const TimeGrid& grid, HurstParam h, std::uint64_t seed,
                     SamplerMethod method = SamplerMethod::automatic);

struct ConditionalLaw {
  std::vector<double> new_points;  // sorted
  std::vector<double> mean;
  std::vector<std::vector<double>> covariance;
};

ConditionalLaw conditional_law(const FbmPath& path, const std::vector<double>& new_points);

// Gaussian bridge fill-in: keeps the revealed values, samples the new points
// from their conditional law.
FbmPath conditional_extension(const FbmPath& path, const std::vector<double>& new_points,
                              std::uint64_t seed);

}  // namespace fbmint
