#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "fbmint/distributions.hpp"
#include "fbmint/verify.hpp"

using namespace fbmint;

namespace {

// orthant probability P(XY <= 0) for a centered pair with correlation rho
double orthant(double rho) { return 0.5 - std::asin(rho) / std::numbers::pi; }

double fbm_correlation(double s, double t, double h) {
  const double cov = 0.5 * (std::pow(s, 2 * h) + std::pow(t, 2 * h) - std::pow(t - s, 2 * h));
  return cov / (std::pow(s, h) * std::pow(t, h));
}

}  // namespace

TEST_CASE("median and verdict serialization") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  TestVerdict v{"x", 0.5, 1.0, true, 10, "note", 7};
  const auto j = to_json(v);
  CHECK(j["name"] == "x");
  CHECK(j["passed"] == true);
  CHECK(j["n"] == 10);
  CHECK(j["seed"] == 7);
}

TEST_CASE("KS statistic oracles") {
  // every sample at the median of N(0,1): the empirical cdf jumps from 0 to 1 where F = 1/2
  CHECK(ks_statistic(std::vector<double>(50, 0.0), standard_normal_cdf) == doctest::Approx(0.5));
  // the n-point grid of quantile midpoints has distance 1/(2n)
  std::vector<double> u;
  for (int i = 0; i < 100; ++i) u.push_back((i + 0.5) / 100.0);
  CHECK(ks_statistic(u, [](double x) { return std::clamp(x, 0.0, 1.0); }) == doctest::Approx(0.005));
  CHECK(ks_threshold(2000) == doctest::Approx(1.5 * 1.36 / std::sqrt(2000.0)));
}

TEST_CASE("sign change probability against the orthant formula") {
  const HurstParam bm(0.5);
  CHECK(sign_change_probability_exact(0.5, 1.0, bm) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sign_change_probability_exact(0.0, 0.7, bm) == 1.0);
  for (double h : {0.3, 0.5, 0.75, 0.9}) {
    for (auto [s, t] : {std::pair{0.1, 0.2}, {0.3, 0.9}, {0.5, 0.55}, {0.05, 1.0}}) {
      CAPTURE(h);
      CAPTURE(s);
      CHECK(sign_change_probability_exact(s, t, HurstParam(h)) ==
            doctest::Approx(orthant(fbm_correlation(s, t, h))).epsilon(1e-12));
    }
  }
  // Brownian motion: P = arccos(sqrt(s/t)) / pi
  CHECK(sign_change_probability_exact(0.2, 0.8, bm) ==
        doctest::Approx(std::acos(std::sqrt(0.25)) / std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("sign change constant is finite, refinement stable and below 2^H on the half region") {
  for (double h : {0.6, 0.75}) {
    const HurstParam hp(h);
    const double c10 = sign_change_constant(hp, 10), c20 = sign_change_constant(hp, 20);
    CHECK(std::isfinite(c20));
    CHECK(std::abs(c20 - c10) / c20 < 0.1);
    CHECK(sign_change_constant(hp, 20, true) <= std::pow(2.0, h));
  }
  const auto verdicts = sign_change_bound_check(HurstParam(0.75), 10, 4000, 3);
  REQUIRE(verdicts.size() == 4);
  for (const auto& v : verdicts) {
    CAPTURE(v.name);
    CHECK(v.passed);
  }
}

TEST_CASE("covariance check") {
  const auto v = covariance_check(TimeGrid::uniform(16), HurstParam(0.6), 4000, 5);
  CHECK(v.passed);
  CHECK(v.statistic < 4.0);
  CHECK(v.n_samples == 4000);
}

TEST_CASE("small ball fit") {
  const std::vector<double> eps{0.1, 0.2, 0.3};
  const SmallBallFit fit = small_ball_fit(HurstParam(0.75), 1.0, eps, 3000, 2);
  REQUIRE(fit.p_hat.size() == 3);
  CHECK(fit.p_hat[0] <= fit.p_hat[1]);
  CHECK(fit.p_hat[1] <= fit.p_hat[2]);
  CHECK(fit.c_hat > 0.0);
  for (std::size_t k = 0; k < 3; ++k)
    if (!fit.one_sided[k])
      CHECK(fit.c_each[k] == doctest::Approx(-std::log(fit.p_hat[k]) * std::pow(eps[k], 1.0 / 0.75)));
  CHECK(small_ball_check(HurstParam(0.75), 1.0, eps, 3000, 2).passed);
}

TEST_CASE("Holder exponent estimates") {
  std::vector<double> ramp(4097);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = double(i) / 4096.0;
  CHECK(holder_exponent_estimate(ramp) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::isinf(holder_exponent_estimate(std::vector<double>(257, 2.0))));
  CHECK_THROWS(holder_exponent_estimate(std::vector<double>(10, 0.0)));

  FbmSampler sampler(TimeGrid::uniform(4096), HurstParam(0.7));
  std::vector<double> est;
  for (std::uint64_t s = 0; s < 100; ++s) est.push_back(holder_exponent_estimate(sampler.sample(derive_seed(4, s)).values));
  CHECK(std::abs(median(est) - 0.7) < 0.1);
}

TEST_CASE("uniform resampling and subsampling") {
  const TimeGrid g(std::vector<double>{0.0, 0.1, 0.5, 1.0});
  const auto r = resample_uniform(g, {0.0, 1.0, 1.0, 0.0}, 2);
  REQUIRE(r.size() == 5);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == doctest::Approx(1.0));
  CHECK(r[2] == doctest::Approx(1.0));
  CHECK(r[3] == doctest::Approx(0.5));
  CHECK(r[4] == 0.0);

  FbmSampler sampler(TimeGrid::uniform(64), HurstParam(0.7));
  const FbmPath p = sampler.sample(1);
  const FbmPath q = subsample(p, 16);
  REQUIRE(q.values.size() == 17);
  for (std::size_t i = 0; i <= 16; ++i) CHECK(q.values[i] == p.values[4 * i]);
}

TEST_CASE("perturbation keeps the prefix and moves the rest") {
  FbmSampler sampler(TimeGrid::uniform(128), HurstParam(0.7));
  const FbmPath p = sampler.sample(2);
  const FbmPath q = perturb_after(p, 0.5, 9);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    if (p.grid[i] <= 0.5) CHECK(q.values[i] == p.values[i]);
    else CHECK(q.values[i] != p.values[i]);
  }
  CHECK(same_prefix(p.values, q.values, p.grid, 0.5));
  CHECK_FALSE(same_prefix(p.values, q.values, p.grid, 0.6));
}

TEST_CASE("Ito residual suite with few paths") {
  ItoSuiteOptions opt;
  opt.n_paths = 20;
  opt.seed = 3;
  const auto verdicts = ito_residual_suite(HurstParam(0.7), AlphaParam(0.35), opt);
  REQUIRE(verdicts.size() == 4);
  // the order fit needs the full path count; see the acceptance run
  CHECK(verdicts[0].passed);
  CHECK(verdicts[3].passed);
  CHECK(verdicts[1].statistic < 0.05);
}
