#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbmint/constructions.hpp"
#include "fbmint/fbm.hpp"
#include "fbmint/frac_calc.hpp"

namespace fbmint {

struct TestVerdict {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::size_t n_samples = 0;
  std::string notes;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json to_json(const TestVerdict& v);

double median(std::vector<double> v);

// entrywise |cov_hat - cov| / SE over the grid, SE from fourth moments of the samples
TestVerdict covariance_check(const TimeGrid& grid, HurstParam h, std::size_t n_paths, std::uint64_t seed,
                             SamplerMethod method = SamplerMethod::automatic, double n_se = 4.0);

struct SmallBallFit {
  std::vector<double> eps;
  std::vector<double> p_hat;       // empirical P(sup |B| < eps)
  std::vector<bool> one_sided;     // zero count, p replaced by its 99% upper bound
  std::vector<double> c_each;      // -log p * eps^{1/H} / T
  double c_hat = 0.0;
};

SmallBallFit small_ball_fit(HurstParam h, double horizon, const std::vector<double>& eps, std::size_t n_paths,
                            std::uint64_t seed, std::size_t grid_n = 512);

// passes when the fitted constant is positive and p_hat does not increase as eps shrinks
TestVerdict small_ball_check(HurstParam h, double horizon, const std::vector<double>& eps, std::size_t n_paths,
                             std::uint64_t seed, std::size_t grid_n = 512);

// P(B_s B_t <= 0) through the orthant formula; s = 0 gives 1
double sign_change_probability_exact(double s, double t, HurstParam h);

// sup over pairs (i/k, j/k), i < j, of P(B_s B_t <= 0) / ((t-s)^H t^{-H})
double sign_change_constant(HurstParam h, int k, bool half_region_only = false);

// Monte Carlo agreement, refinement stability of the fitted constant, the
// s/t <= 1/2 bound 2^H, and the Brownian point (1/2, 1)
std::vector<TestVerdict> sign_change_bound_check(HurstParam h, int k, std::size_t n_paths, std::uint64_t seed);

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
double ks_threshold(std::size_t n);  // 1.5 * 1.36 / sqrt(n)

// log-log slope of the mean window oscillation against dyadic lags; +inf for a constant series
double holder_exponent_estimate(const std::vector<double>& series, double span = 1.0);
// piecewise-linear resampling of a trajectory on [0,1] to 2^k + 1 uniform points
std::vector<double> resample_uniform(const TimeGrid& grid, const std::vector<double>& values, int log2_points);

struct ItoSuiteOptions {
  std::vector<std::size_t> sizes{2048, 4096, 8192};
  std::size_t n_paths = 100;
  std::uint64_t seed = 0;
  double relative_threshold = 1e-2;
  double constant_threshold = 1e-5;
};

// values of a path on a uniform grid read at every (size / n)-th point
FbmPath subsample(const FbmPath& path, std::size_t n);

// verdicts for F in {x^2, |x|^1.1, max(x,0)^2} and f = 1; one path per seed on
// the finest grid, coarser sizes are its subsamples
std::vector<TestVerdict> ito_residual_suite(HurstParam h, AlphaParam alpha, const ItoSuiteOptions& opt);

// copy of the path whose values strictly after t are replaced by an independent draw
FbmPath perturb_after(const FbmPath& path, double t, std::uint64_t seed);

// integrand values at grid points <= t and closes decided by t agree exactly
bool same_prefix(const Integrand& a, const Integrand& b, double t);
bool same_prefix(const std::vector<double>& a, const std::vector<double>& b, const TimeGrid& grid, double t);

}  // namespace fbmint
