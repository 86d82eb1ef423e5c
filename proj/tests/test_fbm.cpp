#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fbmint/errors.hpp"
#include "fbmint/fbm.hpp"

using namespace fbmint;

namespace {

// empirical second moments of the path values over many seeds
std::vector<std::vector<double>> empirical_moments(FbmSampler& sampler, std::size_t n_paths,
                                                   std::uint64_t master) {
  const std::size_t n = sampler.grid().size();
  std::vector<std::vector<double>> acc(n, std::vector<double>(n, 0.0));
  for (std::size_t p = 0; p < n_paths; ++p) {
    const FbmPath path = sampler.sample(derive_seed(master, p));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) acc[i][j] += path.values[i] * path.values[j];
  }
  for (auto& row : acc)
    for (auto& v : row) v /= static_cast<double>(n_paths);
  return acc;
}

// max over entries of |empirical - exact| in units of the Gaussian standard error
double worst_z(FbmSampler& sampler, std::size_t n_paths, std::uint64_t master, HurstParam h) {
  const auto m = empirical_moments(sampler, n_paths, master);
  const auto& g = sampler.grid().points();
  double worst = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    for (std::size_t j = i; j < g.size(); ++j) {
      const double cij = fbm_covariance(g[i], g[j], h);
      const double se = std::sqrt((fbm_covariance(g[i], g[i], h) * fbm_covariance(g[j], g[j], h) +
                                   cij * cij) / static_cast<double>(n_paths));
      worst = std::max(worst, std::fabs(m[i][j] - cij) / se);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("covariance closed form") {
  CHECK(fbm_covariance(1.0, 1.0, HurstParam(0.3)) == doctest::Approx(1.0));
  CHECK(fbm_covariance(0.3, 0.8, HurstParam(0.5)) == doctest::Approx(0.3));
  CHECK(fbm_covariance(0.25, 1.0, HurstParam(0.75)) == doctest::Approx(0.2377404735808355).epsilon(1e-14));
  CHECK(fbm_covariance(0.2, 0.9, HurstParam(0.7)) == fbm_covariance(0.9, 0.2, HurstParam(0.7)));
  CHECK_THROWS_AS(fbm_covariance(-0.1, 0.5, HurstParam(0.7)), ArgumentError);
  CHECK_THROWS_AS(fbm_covariance(0.1, 1.5, HurstParam(0.7)), ArgumentError);
}

TEST_CASE("hurst and grid validation") {
  CHECK_THROWS_AS(HurstParam(0.0), ArgumentError);
  CHECK_THROWS_AS(HurstParam(1.0), ArgumentError);
  CHECK_THROWS_AS(HurstParam(0.4).require_persistent(), ArgumentError);
  CHECK_NOTHROW(HurstParam(0.6).require_persistent());
  CHECK_THROWS_AS(TimeGrid(std::vector<double>{0.1, 0.5}), ArgumentError);
  CHECK_THROWS_AS(TimeGrid(std::vector<double>{0.0, 0.5, 0.5}), ArgumentError);
  CHECK_THROWS_AS(TimeGrid(std::vector<double>{0.0, 1.5}), ArgumentError);
  const TimeGrid g = TimeGrid::uniform(8);
  CHECK(g.size() == 9);
  CHECK(g.index_of(0.375) == 3);
  CHECK_THROWS_AS(g.index_of(0.3), ArgumentError);
  CHECK(g.last_at_or_before(0.3) == 2);
  CHECK(g.nearest(0.3) == 2);
  CHECK(g.nearest(0.33) == 3);
}

TEST_CASE("increment covariance: stable branches agree with the direct formula") {
  const double h = 0.7;
  auto direct = [h](long double a1, long double b1, long double a2, long double b2) {
    const long double p = 2.0L * h;
    auto f = [p](long double z) { return std::pow(std::fabs(z), p); };
    return 0.5L * (f(b2 - a1) + f(a2 - b1) - f(b2 - b1) - f(a2 - a1));
  };
  // gap 40x and 2e4x the increment length
  for (long double gap : {0.04L, 0.2L}) {
    const long double d = 1e-3L * (gap < 0.1L ? 1.0L : 0.01L);
    const long double a1 = 0.1L, b1 = a1 + d, a2 = b1 + gap, b2 = a2 + 2.0L * d;
    const double want = static_cast<double>(direct(a1, b1, a2, b2));
    const double got = static_cast<double>(increment_covariance(a1, b1, a2, b2, h));
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
  // Brownian case: disjoint increments uncorrelated, variance equals length
  CHECK(static_cast<double>(increment_covariance(0.1L, 0.3L, 0.5L, 0.9L, 0.5)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(static_cast<double>(increment_covariance(0.1L, 0.3L, 0.1L, 0.3L, 0.5)) == doctest::Approx(0.2));
}

TEST_CASE("degenerate grid and determinism") {
  const FbmPath p0 = generate_fbm(TimeGrid(), HurstParam(0.7), 5);
  REQUIRE(p0.values.size() == 1);
  CHECK(p0.values[0] == 0.0);

  for (auto method : {SamplerMethod::cholesky, SamplerMethod::circulant}) {
    const TimeGrid g = TimeGrid::uniform(256);
    const FbmPath a = generate_fbm(g, HurstParam(0.7), 42, method);
    const FbmPath b = generate_fbm(g, HurstParam(0.7), 42, method);
    CHECK(a.values == b.values);
    CHECK(a.values[0] == 0.0);
    const FbmPath c = generate_fbm(g, HurstParam(0.7), 43, method);
    CHECK(a.values != c.values);
  }
}

TEST_CASE("seed derivation separates indices") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(7, 9) == derive_seed(7, 9));
}

TEST_CASE("terminal variance is one on a 2^12 grid") {
  FbmSampler sampler(TimeGrid::uniform(4096), HurstParam(0.7));
  CHECK(sampler.method() == SamplerMethod::circulant);
  const std::size_t n = 10000;
  double s2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double b1 = sampler.sample(derive_seed(11, p)).values.back();
    s2 += b1 * b1;
  }
  const double var = s2 / n;
  CHECK(std::fabs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("empirical covariance on 16 points, both samplers") {
  std::vector<double> pts{0.0};
  for (int k = 1; k <= 15; ++k) pts.push_back(k / 15.0);
  const HurstParam h(0.75);
  FbmSampler chol(TimeGrid(pts), h, SamplerMethod::cholesky);
  CHECK(worst_z(chol, 10000, 3, h) < 4.0);
  FbmSampler circ(TimeGrid::uniform(15), h, SamplerMethod::circulant);
  CHECK(worst_z(circ, 10000, 4, h) < 4.0);
}

TEST_CASE("non-uniform grid accumulating at one") {
  std::vector<double> pts{0.0};
  for (int k = 1; k <= 30; ++k) pts.push_back(1.0 - std::pow(2.0, -k));
  const HurstParam h(0.7);
  FbmSampler sampler{TimeGrid(pts), h};
  CHECK(sampler.method() == SamplerMethod::cholesky);
  // normalized last increments should have unit variance
  const std::size_t n = 4000;
  double s2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const FbmPath path = sampler.sample(derive_seed(21, p));
    const double d = pts[30] - pts[29];
    const double z = (path.values[30] - path.values[29]) / std::pow(d, h.h);
    s2 += z * z;
  }
  CHECK(std::fabs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("conditional extension") {
  const HurstParam h(0.7);
  FbmPath base{TimeGrid(std::vector<double>{0.0, 0.5, 1.0}), {0.0, 0.3, -0.2}, h, 1};

  CHECK(conditional_extension(base, {}, 3).values == base.values);
  CHECK_THROWS_AS(conditional_law(base, {0.5}), ArgumentError);

  const ConditionalLaw law = conditional_law(base, {0.25});
  CHECK(law.mean[0] == doctest::Approx(0.17179297587036685).epsilon(1e-12));
  CHECK(law.covariance[0][0] == doctest::Approx(0.048399864975755214).epsilon(1e-10));

  FbmPath bm{TimeGrid(std::vector<double>{0.0, 0.4, 0.8}), {0.0, 1.0, -0.5}, HurstParam(0.5), 1};
  CHECK(conditional_law(bm, {0.6}).mean[0] == doctest::Approx(0.25));

  const FbmPath ext = conditional_extension(base, {0.25, 0.75}, 9);
  REQUIRE(ext.grid.size() == 5);
  CHECK(ext.at(0.5) == 0.3);
  CHECK(ext.at(1.0) == -0.2);
  CHECK(ext.values[0] == 0.0);
}
