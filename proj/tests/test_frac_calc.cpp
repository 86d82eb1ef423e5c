#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "fbmint/errors.hpp"
#include "fbmint/frac_calc.hpp"

using namespace fbmint;

namespace {

Integrand from_times(const TimeGrid& g, double (*f)(double)) {
  Integrand out = Integrand::zeros(g);
  for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = f(g[i]);
  return out;
}

FbmPath deterministic_path(const TimeGrid& g, double (*f)(double)) {
  FbmPath p{g, std::vector<double>(g.size()), HurstParam(0.7), 0};
  for (std::size_t i = 0; i < g.size(); ++i) p.values[i] = f(g[i]);
  return p;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

double f_beta(double x, double beta) {
  return (1.0 + beta) * std::pow(std::fabs(x), beta) * (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0));
}

}  // namespace

TEST_CASE("alpha window and default") {
  CHECK(default_alpha(HurstParam(0.7)).alpha == doctest::Approx(0.42));
  CHECK_THROWS_AS(AlphaParam(0.0), ArgumentError);
  CHECK_THROWS_AS(AlphaParam(0.25).require_window(HurstParam(0.7)), ArgumentError);
  CHECK_THROWS_AS(AlphaParam(0.55).require_window(HurstParam(0.7)), ArgumentError);
  CHECK_NOTHROW(AlphaParam(0.35).require_window(HurstParam(0.7)));
}

TEST_CASE("left derivative closed forms") {
  const TimeGrid g = TimeGrid::uniform(64);
  const AlphaParam a(0.3);
  CHECK(frac_deriv_left(Integrand::zeros(g), 0.0, a, 1.0) == 0.0);

  Integrand c = Integrand::zeros(g);
  std::fill(c.values.begin(), c.values.end(), 2.5);
  CHECK(frac_deriv_left(c, 0.25, a, 0.8) ==
        doctest::Approx(2.5 * std::pow(0.55, -0.3) / std::tgamma(0.7)).epsilon(1e-13));

  // identity: Gamma(2)/Gamma(2-alpha) x^{1-alpha}; the interpolant is exact
  const Integrand id = from_times(g, [](double u) { return u; });
  CHECK(frac_deriv_left(id, 0.0, a, 1.0) == doctest::Approx(1.1005474055236655).epsilon(1e-12));
  CHECK(frac_deriv_left(id, 0.0, a, 0.3) ==
        doctest::Approx(std::pow(0.3, 0.7) / std::tgamma(1.7)).epsilon(1e-12));

  // u^2 on a fine grid against 2 x^{2-alpha} / Gamma(3-alpha)
  const TimeGrid fine = TimeGrid::uniform(4096);
  const Integrand sq = from_times(fine, [](double u) { return u * u; });
  CHECK(std::fabs(frac_deriv_left(sq, 0.0, a, 1.0) - 1.2947616535572535) < 1e-3);

  CHECK_THROWS_AS(frac_deriv_left(id, 0.5, a, 0.5), ArgumentError);
  CHECK_THROWS_AS(frac_deriv_left(id, 0.5, a, 0.25), ArgumentError);
}

TEST_CASE("right derivative closed forms") {
  const TimeGrid g = TimeGrid::uniform(64);
  const AlphaParam a(0.4);
  const FbmPath zero = deterministic_path(g, [](double) { return 0.0; });
  CHECK(frac_deriv_right_fbm(zero, 1.0, a, 0.3) == 0.0);
  const FbmPath flat = deterministic_path(g, [](double) { return 3.0; });
  CHECK(frac_deriv_right_fbm(flat, 1.0, a, 0.3) == doctest::Approx(0.0).epsilon(1e-14));
  // linear path: (b-x)^alpha / Gamma(1+alpha)
  const FbmPath lin = deterministic_path(g, [](double u) { return u; });
  CHECK(frac_deriv_right_fbm(lin, 1.0, a, 0.7) == doctest::Approx(0.6962989342966986).epsilon(1e-12));
  CHECK_THROWS_AS(frac_deriv_right_fbm(lin, 0.5, a, 0.5), ArgumentError);
}

TEST_CASE("right derivative of fBm is bounded and refinement stable") {
  const HurstParam h(0.7);
  const AlphaParam a(0.4);
  const FbmPath fine = generate_fbm(TimeGrid::uniform(2048), h, 77);
  std::vector<double> coarse_vals;
  for (std::size_t i = 0; i < fine.values.size(); i += 2) coarse_vals.push_back(fine.values[i]);
  const FbmPath coarse{TimeGrid::uniform(1024), coarse_vals, h, 77};
  auto sup = [&](const FbmPath& p) {
    double m = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double x = (k + 0.37) / 200.0;
      m = std::max(m, std::fabs(frac_deriv_right_fbm(p, 1.0, a, x)));
    }
    return m;
  };
  const double s1 = sup(coarse), s2 = sup(fine);
  CHECK(std::isfinite(s2));
  CHECK(s2 / s1 < 2.0);
  CHECK(s1 / s2 < 2.0);
}

TEST_CASE("integral of one against the identity path") {
  const TimeGrid g = TimeGrid::uniform(128);
  const FbmPath lin = deterministic_path(g, [](double u) { return u; });
  Integrand one = Integrand::zeros(g);
  std::fill(one.values.begin(), one.values.end(), 1.0);
  CHECK(gls_integral(one, lin, 0.0, 1.0, AlphaParam(0.35)) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(gls_integral(one, lin, 0.25, 0.75, AlphaParam(0.35)) == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("Ito identities against fBm") {
  const HurstParam h(0.7);
  const AlphaParam a(0.35);
  FbmSampler sampler(TimeGrid::uniform(4096), h);
  std::vector<double> r_one, r_sq, r_pow;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FbmPath p = sampler.sample(derive_seed(5, s));
    const double b = p.values.back();
    Integrand one = Integrand::zeros(p.grid);
    std::fill(one.values.begin(), one.values.end(), 1.0);
    r_one.push_back(std::fabs(gls_integral(one, p, 0.0, 1.0, a) - b));
    const Integrand twice = sample_function(p, [](double x) { return 2.0 * x; });
    r_sq.push_back(std::fabs(gls_integral(twice, p, 0.0, 1.0, a) - b * b) / (b * b));
    const Integrand fb = sample_function(p, [](double x) { return f_beta(x, 0.5); });
    r_pow.push_back(std::fabs(gls_integral(fb, p, 0.0, 1.0, a) - std::pow(std::fabs(b), 1.5)) /
                    std::pow(std::fabs(b), 1.5));
  }
  CHECK(*std::max_element(r_one.begin(), r_one.end()) < 1e-5);
  CHECK(median(r_sq) < 1e-3);
  CHECK(median(r_pow) < 1e-2);
}

TEST_CASE("additivity, linearity and agreement with the exact running value") {
  const HurstParam h(0.7);
  const AlphaParam a(0.35);
  const FbmPath p = generate_fbm(TimeGrid::uniform(2048), h, 9);
  const Integrand f = sample_function(p, [](double x) { return std::sin(3.0 * x) + x; });
  const Integrand g = sample_function(p, [](double x) { return std::exp(x); });
  const double whole = gls_integral(f, p, 0.0, 1.0, a);
  const double left = gls_integral(f, p, 0.0, 0.5, a);
  const double right = gls_integral(f, p, 0.5, 1.0, a);
  const double exact = gls_running(f, p).back();
  const double tol = 1e-4 * (1.0 + std::fabs(exact));
  CHECK(std::fabs(whole - exact) < tol);
  CHECK(std::fabs(left + right - whole) < 10.0 * tol);

  const double lin = gls_integral(f * 2.0 + g * (-3.0), p, 0.0, 1.0, a);
  const double parts = 2.0 * whole - 3.0 * gls_integral(g, p, 0.0, 1.0, a);
  CHECK(std::fabs(lin - parts) < 1e-10 * (1.0 + std::fabs(parts)));
}

TEST_CASE("Young regime: gap to the left Riemann sum shrinks under refinement") {
  const HurstParam h(0.7);
  const AlphaParam a(0.35);
  const FbmPath fine = generate_fbm(TimeGrid::uniform(4096), h, 13);
  std::vector<double> cv;
  for (std::size_t i = 0; i < fine.values.size(); i += 4) cv.push_back(fine.values[i]);
  const FbmPath coarse{TimeGrid::uniform(1024), cv, h, 13};
  auto gap = [&](const FbmPath& p) {
    const Integrand f = sample_function(p, [](double x) { return x; });
    return std::fabs(gls_integral(f, p, 0.0, 1.0, a) - left_riemann_sum(f, p, 0.0, 1.0));
  };
  CHECK(gap(fine) < gap(coarse));
}

TEST_CASE("stopped integrand with a jump") {
  const HurstParam h(0.7);
  const FbmPath p = generate_fbm(TimeGrid::uniform(512), h, 3);
  Integrand f = sample_function(p, [](double x) { return 1.0 + x; });
  for (std::size_t i = 301; i < f.values.size(); ++i) f.values[i] = 0.0;
  f.add_close(StepClose{300, 0.5 * f.values[300], 0.5 * (1.0 + p.values[301]), 0.5});
  const double exact = gls_running(f, p).back();
  CHECK(std::fabs(gls_integral(f, p, 0.0, 1.0, AlphaParam(0.4)) - exact) < 1e-3);
  CHECK_THROWS_AS(f.add_close(StepClose{100, 0, 0, 1}), ArgumentError);
}

TEST_CASE("norm") {
  const TimeGrid g = TimeGrid::uniform(256);
  const AlphaParam a(0.4);
  CHECK(norm_1_alpha(Integrand::zeros(g), 0.0, 1.0, a) == 0.0);
  Integrand c = Integrand::zeros(g);
  std::fill(c.values.begin(), c.values.end(), -2.0);
  CHECK(norm_1_alpha(c, 0.0, 0.5, a) == doctest::Approx(2.0 * std::pow(0.5, 0.6) / 0.6).epsilon(1e-8));

  const FbmPath p = generate_fbm(g, HurstParam(0.7), 4);
  const Integrand f = sample_function(p, [](double x) { return x * x - 0.1; });
  const Integrand k = sample_function(p, [](double x) { return std::cos(5.0 * x); });
  const double nf = norm_1_alpha(f, 0.0, 1.0, a);
  CHECK(nf > 0.0);
  CHECK(norm_1_alpha(f * -3.0, 0.0, 1.0, a) == doctest::Approx(3.0 * nf).epsilon(1e-12));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    const double x = u(rng), y = u(rng);
    const double lhs = norm_1_alpha(f * x + k * y, 0.0, 1.0, a);
    const double rhs = norm_1_alpha(f * x, 0.0, 1.0, a) + norm_1_alpha(k * y, 0.0, 1.0, a);
    CHECK(lhs <= rhs * (1.0 + 1e-9));
  }
}

TEST_CASE("overflow guard") {
  const FbmPath p = generate_fbm(TimeGrid::uniform(64), HurstParam(0.7), 1);
  Integrand huge = Integrand::zeros(p.grid);
  std::fill(huge.values.begin(), huge.values.end(), 1e14);
  CHECK_THROWS_AS(gls_integral(huge, p, 0.0, 1.0, AlphaParam(0.4)), IntegrabilityError);
  CHECK_THROWS_AS(norm_1_alpha(huge, 0.0, 1.0, AlphaParam(0.4)), IntegrabilityError);
}

TEST_CASE("integral bound via the supremum of the right derivative") {
  const HurstParam h(0.75);
  const AlphaParam a(0.35);
  FbmSampler sampler(TimeGrid::uniform(128), h);
  const FbmPath p0 = sampler.sample(1);
  const BoundReport z = integral_bound_check(Integrand::zeros(p0.grid), p0, 1.0, a);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);
  CHECK(z.k_alpha > 0.0);
  CHECK(z.holds);
  int held = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const FbmPath p = sampler.sample(derive_seed(8, s));
    Integrand one = Integrand::zeros(p.grid);
    std::fill(one.values.begin(), one.values.end(), 1.0);
    held += integral_bound_check(one, p, 1.0, a).holds ? 1 : 0;
  }
  CHECK(held == 100);
}
