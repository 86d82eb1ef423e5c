#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fbmint/claims.hpp"
#include "fbmint/constructions.hpp"
#include "fbmint/errors.hpp"
#include "fbmint/grid.hpp"
#include "fbmint/verify.hpp"

using namespace fbmint;

namespace {

const HurstParam h07(0.7);

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("zeta and block partitions") {
  CHECK(zeta(2.0) == doctest::Approx(std::numbers::pi * std::numbers::pi / 6.0).epsilon(1e-10));
  CHECK(zeta(4.0) == doctest::Approx(std::pow(std::numbers::pi, 4) / 90.0).epsilon(1e-10));
  const BlockPartition p(1.2, 40);
  CHECK(p.t.front() == 0.0);
  CHECK(p.t.size() == 41);
  for (int n = 1; n <= 40; ++n) {
    CHECK(p.t[n] > p.t[n - 1]);
    CHECK(p.t[n] - p.t[n - 1] == doctest::Approx(p.delta[n]).epsilon(1e-12));
    CHECK(p.delta[n] == doctest::Approx(std::pow(n, -1.2) / zeta(1.2)).epsilon(1e-12));
  }
  CHECK(p.t.back() < 1.0);
  const BlockPartition half(1.2, 10, 32, 0.5, 0.5);
  CHECK(half.t.front() == 0.5);
  CHECK(half.t.back() < 1.0);
  const int n = BlockPartition::blocks_above(1.2, 1.0, 1e-3);
  CHECK(std::pow(n, -1.2) / zeta(1.2) >= 1e-3);
  CHECK(std::pow(n + 1, -1.2) / zeta(1.2) < 1e-3);
}

TEST_CASE("grid builder places marks and partition bounds") {
  const DivergentParams dp(1.2, 0.1, 20);
  const TimeGrid g = build_grid({256, {0.5, 0.9}, {divergent_layout(dp)}});
  CHECK(g.index_of(0.5) > 0);
  CHECK(g.index_of(0.9) > 0);
  const auto idx = dp.partition.realize(g);
  CHECK(idx.size() == 21);
  for (std::size_t n = 0; n < idx.size(); ++n) CHECK(std::abs(g[idx[n]] - dp.partition.t[n]) < 1e-3);
  for (std::size_t n = 1; n < idx.size(); ++n) CHECK(idx[n] - idx[n - 1] >= 16);

  const TimeGrid exact = build_grid({64, {0.3}, {}}, GridMode::exact);
  CHECK(exact.index_of(0.3) > 0);
  // lattice mode floors marks that are not lattice points
  const TimeGrid lat = build_grid({64, {0.3}, {}}, GridMode::lattice);
  CHECK(lat.has_lattice());
  CHECK(lat.last_at_or_before(0.3) > 0);
}

TEST_CASE("kernel primitives differentiate to the kernels") {
  for (Kernel k : {Kernel::power, Kernel::sign}) {
    for (double x : {-0.8, -0.1, 0.05, 0.3, 1.7}) {
      const double e = 1e-6;
      const double d = (kernel_primitive(k, 0.1, x + e) - kernel_primitive(k, 0.1, x - e)) / (2 * e);
      CHECK(d == doctest::Approx(kernel_value(k, 0.1, x)).epsilon(1e-6));
    }
    CHECK(kernel_primitive(k, 0.1, 0.0) == 0.0);
  }
}

TEST_CASE("divergent parameter windows name the violated window") {
  CHECK(message_of([] { DivergentParams(1.5, 0.1, 10).validate(h07); }).find("gamma outside (1, 1/H)") == 0);
  CHECK(message_of([] { DivergentParams(1.2, 0.3, 10).validate(h07); }).find("beta outside (0, 1/(gamma*H)-1)") ==
        0);
  CHECK_THROWS_AS(DivergentParams(1.2, 0.1, 10).validate(HurstParam(0.4)), ArgumentError);
  CHECK_NOTHROW(DivergentParams(1.2, 0.1, 10).validate(h07));
}

TEST_CASE("divergent block increments follow the Ito identity of the power kernel") {
  const DivergentParams dp(1.2, 0.1, 30, 32, 3.0);
  const TimeGrid g = build_grid({1024, {}, {divergent_layout(dp)}});
  FbmSampler sampler(g, h07);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const FbmPath path = sampler.sample(derive_seed(7, s));
    const DivergentResult r = build_divergent_integrand(path, dp);
    REQUIRE(r.records.size() == 30);
    for (std::size_t n = 1; n < r.block_indices.size(); ++n) {
      const std::size_t c = r.block_indices[n - 1];
      const auto& rec = r.records[n - 1];
      const double x = path.values[rec.tau_index] - path.values[c];
      const double inc = r.running[r.block_indices[n]] - r.running[c];
      CHECK(inc == doctest::Approx(3.0 * std::pow(std::abs(x), 1.1)).epsilon(1e-12));
      if (rec.triggered) CHECK(std::abs(x) >= std::pow(double(n), -1.0 / 1.1));
      CHECK(inc >= 0.0);
    }
  }
}

TEST_CASE("divergent running value agrees with trapezoid quadrature of the integrand") {
  const DivergentParams dp(1.2, 0.1, 12, 64, 1.0);
  const TimeGrid g = build_grid({4096, {}, {divergent_layout(dp)}});
  FbmSampler sampler(g, h07);
  std::vector<double> rel;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FbmPath path = sampler.sample(derive_seed(9, s));
    const DivergentResult r = build_divergent_integrand(path, dp);
    const double quad = gls_running(r.integrand, path).back();
    if (r.running.back() > 1e-3) rel.push_back(std::abs(quad - r.running.back()) / r.running.back());
  }
  REQUIRE(rel.size() >= 10);
  CHECK(median(rel) < 0.02);
}

TEST_CASE("median divergence grows with the number of blocks") {
  const DivergentParams dp(1.2, 0.1, 40);
  const TimeGrid g = build_grid({2048, {}, {divergent_layout(dp)}});
  FbmSampler sampler(g, HurstParam(0.75));
  std::vector<double> v10, v20, v40;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const auto prof = divergence_profile(sampler.sample(derive_seed(3, s)), dp);
    REQUIRE(prof.size() == 41);
    CHECK(prof.front().second == 0.0);
    v10.push_back(prof[10].second);
    v20.push_back(prof[20].second);
    v40.push_back(prof[40].second);
  }
  CHECK(median(v10) < median(v20));
  CHECK(median(v20) < median(v40));
}

TEST_CASE("prescribed distribution: point mass gives a constant terminal") {
  const DivergentParams dp(1.2, 0.1, 30, 32, 50.0);
  const TimeGrid g = build_grid({1024, {0.5}, {distribution_layout(dp)}});
  FbmSampler sampler(g, h07);
  const TargetDistribution point = TargetDistribution::parse("point:0.7");
  int resolved = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const PrescribedResult r = prescribed_distribution_integrand(sampler.sample(derive_seed(5, s)), point, dp);
    if (!r.resolved) continue;
    ++resolved;
    CHECK(r.terminal == 0.7);
    CHECK(r.running.back() == 0.7);
    CHECK(r.tau >= 0.5);
    CHECK(r.tau < 1.0);
  }
  CHECK(resolved >= 19);
}

TEST_CASE("prescribed distribution: the law of B_1/2 reproduces B_1/2") {
  // F = N(0, 2^{-2H}) makes the transport the identity
  const DivergentParams dp(1.2, 0.1, 30, 32, 50.0);
  const TimeGrid g = build_grid({1024, {0.5}, {distribution_layout(dp)}});
  FbmSampler sampler(g, h07);
  const TargetDistribution law = TargetDistribution::parse("normal:0:" + std::to_string(std::pow(2.0, -1.4)));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FbmPath path = sampler.sample(derive_seed(6, s));
    const PrescribedResult r = prescribed_distribution_integrand(path, law, dp);
    CHECK(r.target == doctest::Approx(path.at(0.5)).epsilon(1e-6));
    if (r.resolved) CHECK(r.terminal == r.target);
  }
}

TEST_CASE("prescribed distribution keeps the integrand off before one half") {
  const DivergentParams dp(1.2, 0.1, 20, 32, 50.0);
  const TimeGrid g = build_grid({512, {0.5}, {distribution_layout(dp)}});
  FbmSampler sampler(g, h07);
  const PrescribedResult r =
      prescribed_distribution_integrand(sampler.sample(11), TargetDistribution::parse("exp:1"), dp);
  for (std::size_t i = 0; i <= g.index_of(0.5); ++i) {
    CHECK(r.integrand.values[i] == 0.0);
    CHECK(r.running[i] == 0.0);
  }
}

TEST_CASE("improper representation: exact block targets and sandwich") {
  const BlockPartition outer(2.0, 12, 32);
  const NestedDivergent nested{NestedSpec{1.2, 8, 16}, 0.1, 50.0};
  const ClaimSpec claim = ClaimSpec::parse("custom_marks:identity:0.9");
  const TimeGrid g = build_grid({512, claim.marks, {improper_layout(outer, nested)}});
  FbmSampler sampler(g, h07);
  for (std::uint64_t s = 0; s < 8; ++s) {
    const FbmPath path = sampler.sample(derive_seed(12, s));
    const auto idx = outer.realize(g);
    const std::vector<double> xi = claim_values_at(claim, path, idx);
    const ImproperResult r = improper_representation(path, xi, outer, nested);
    REQUIRE(r.resolved.size() == idx.size() - 1);
    for (std::size_t n = 0; n + 1 < idx.size(); ++n) {
      const double from = r.x[idx[n]];
      const double lo = std::min(from, xi[n]) - 1e-12, hi = std::max(from, xi[n]) + 1e-12;
      for (std::size_t j = idx[n]; j <= idx[n + 1]; ++j) {
        CHECK(r.x[j] >= lo);
        CHECK(r.x[j] <= hi);
      }
      if (r.resolved[n]) CHECK(r.x[idx[n + 1]] == xi[n]);
    }
    if (r.resolved.back()) CHECK(r.x[idx.back()] == claim_payoff(claim, path));
  }
}

TEST_CASE("improper representation of a constant starts from the given value") {
  const BlockPartition outer(2.0, 6, 32);
  const NestedDivergent nested{NestedSpec{1.2, 8, 16}, 0.1, 50.0};
  const TimeGrid g = build_grid({256, {}, {improper_layout(outer, nested)}});
  FbmSampler sampler(g, h07);
  const FbmPath path = sampler.sample(2);
  const std::vector<double> xi(7, 1.5);
  const ImproperResult r = improper_representation(path, xi, outer, nested, {}, 1.5);
  for (double x : r.x) CHECK(x == 1.5);
  for (double v : r.integrand.values) CHECK(v == 0.0);
}

TEST_CASE("replication parameters: frozen values for H = 0.75, a = 0.5") {
  const HurstParam h(0.75);
  const ReplicationParams p = choose_replication_params(h, 0.5);
  CHECK(p.alpha.alpha == doctest::Approx(0.375));
  CHECK(p.gamma == doctest::Approx(16.0 / 3.0));
  // kappa window (gamma (H - a), gamma (1 - alpha) - 1) = (4/3, 7/3)
  CHECK(p.kappa == doctest::Approx(11.0 / 6.0));
  CHECK(p.kappa > 4.0 / 3.0);
  CHECK(p.kappa < 7.0 / 3.0);
  CHECK(p.b == doctest::Approx(0.453125));
  CHECK_NOTHROW(p.validate(h));
  ReplicationParams bad = p;
  bad.kappa = 3.0;
  CHECK_THROWS_AS(bad.validate(h), ConfigError);
  bad = p;
  bad.gamma = 2.0;
  CHECK_THROWS_AS(bad.validate(h), ConfigError);
}

TEST_CASE("replication reaches the claim and mostly runs Case A") {
  const ClaimSpec claim = ClaimSpec::parse("custom_marks:square:0.5");
  const ReplicationParams rp = choose_replication_params(h07, claim.holder_exponent(h07));
  const ReplicationSetup setup;
  const TimeGrid g = build_grid({256, claim.marks, {replication_layout(rp, setup)}});
  FbmSampler sampler(g, h07);
  std::vector<double> err, case_b;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const FbmPath path = sampler.sample(derive_seed(21, s));
    const ReplicationResult r = replicate_holder_claim(path, claim, rp, setup);
    err.push_back(std::abs(r.terminal - claim_payoff(claim, path)));
    case_b.push_back(case_b_fraction(r.case_log, setup.n_max));
    CHECK(r.running.back() == r.terminal);
    for (std::size_t i = 0; i <= r.block_indices[1]; ++i) CHECK(r.integrand.values[i] == 0.0);
  }
  CHECK(median(err) < 1e-12);
  CHECK(median(case_b) <= 0.05);
}

TEST_CASE("adaptedness: every construction is unchanged before a perturbation") {
  const ClaimSpec claim = ClaimSpec::parse("custom_marks:square:0.5");
  const DivergentParams dp(1.2, 0.1, 25, 32, 50.0);
  const BlockPartition outer(2.0, 10, 32);
  const NestedDivergent nested{NestedSpec{1.2, 8, 16}, 0.1, 50.0};
  const ReplicationParams rp = choose_replication_params(h07, claim.holder_exponent(h07));
  const ReplicationSetup setup;
  const TargetDistribution target = TargetDistribution::parse("exp:1");
  const std::vector<double> cuts{0.2, 0.55, 0.8, 0.97, 0.999};

  // build(path) returns (integrand, running value)
  auto check = [&](const TimeGrid& g, auto build) {
    FbmSampler sampler(g, h07);
    for (std::uint64_t s = 0; s < 3; ++s) {
      const FbmPath path = sampler.sample(derive_seed(31, s));
      const auto [fa, va] = build(path);
      for (double t : cuts) {
        CAPTURE(t);
        const auto [fb, vb] = build(perturb_after(path, t, 99 + s));
        CHECK(same_prefix(fa, fb, t));
        CHECK(same_prefix(va, vb, g, t));
      }
    }
  };
  SUBCASE("divergent") {
    check(build_grid({512, {}, {divergent_layout(dp)}}), [&](const FbmPath& p) {
      auto r = build_divergent_integrand(p, dp);
      return std::make_pair(r.integrand, r.running);
    });
  }
  SUBCASE("prescribed distribution") {
    check(build_grid({512, {0.5}, {distribution_layout(dp)}}), [&](const FbmPath& p) {
      auto r = prescribed_distribution_integrand(p, target, dp);
      return std::make_pair(r.integrand, r.running);
    });
  }
  SUBCASE("improper representation") {
    check(build_grid({512, claim.marks, {improper_layout(outer, nested)}}), [&](const FbmPath& p) {
      auto r = improper_representation(p, claim_values_at(claim, p, outer.realize(p.grid)), outer, nested);
      return std::make_pair(r.integrand, r.x);
    });
  }
  SUBCASE("replication") {
    check(build_grid({256, claim.marks, {replication_layout(rp, setup)}}), [&](const FbmPath& p) {
      auto r = replicate_holder_claim(p, claim, rp, setup);
      return std::make_pair(r.integrand, r.running);
    });
  }
}

TEST_CASE("perturbation is detected after the cut") {
  const DivergentParams dp(1.2, 0.1, 25, 32, 1.0);
  const TimeGrid g = build_grid({512, {}, {divergent_layout(dp)}});
  FbmSampler sampler(g, h07);
  const FbmPath path = sampler.sample(4);
  const FbmPath other = perturb_after(path, 0.3, 5);
  const auto a = build_divergent_integrand(path, dp), b = build_divergent_integrand(other, dp);
  CHECK_FALSE(same_prefix(a.integrand, b.integrand, 0.6));
}

TEST_CASE("claim catalog") {
  const TimeGrid g = build_grid({64, {0.25, 0.4, 0.5, 0.75, 0.9}, {}}, GridMode::exact);
  FbmSampler sampler(g, h07);
  const FbmPath path = sampler.sample(17);
  const StockModel stock;
  auto S = [&](double t) { return stock.price(t, path.at(t)); };
  CHECK(stock.price(0.5, 0.3) == doctest::Approx(std::exp(0.1 * 0.5 + 0.2 * 0.3)));

  CHECK(claim_payoff(ClaimSpec::parse("european_call:0.5:1.0", stock), path) ==
        doctest::Approx(std::max(S(0.5) - 1.0, 0.0)));
  CHECK(claim_payoff(ClaimSpec::parse("asian_mean:4", stock), path) ==
        doctest::Approx((S(0.25) + S(0.5) + S(0.75) + S(1.0)) / 4.0));
  CHECK(claim_payoff(ClaimSpec::parse("digital:0.5:1.0", stock), path) == (S(0.5) > 1.0 ? 1.0 : 0.0));
  double run_max = 0.0;
  for (std::size_t i = 0; i <= g.index_of(0.9); ++i) run_max = std::max(run_max, stock.price(g[i], path.values[i]));
  CHECK(claim_payoff(ClaimSpec::parse("lookback_max:0.9", stock), path) == doctest::Approx(run_max));
  CHECK(claim_payoff(ClaimSpec::parse("barrier:0.9:1.05", stock), path) == (run_max > 1.05 ? 1.0 : 0.0));
  const double b5 = path.at(0.5), b9 = path.at(0.9);
  CHECK(claim_payoff(ClaimSpec::parse("custom_marks:square:0.5"), path) == doctest::Approx(b5 * b5));
  CHECK(claim_payoff(ClaimSpec::parse("custom_marks:sum:0.5:0.9"), path) == doctest::Approx(b5 + b9));
  CHECK(claim_payoff(ClaimSpec::parse("custom_marks:product:0.5:0.9"), path) == doctest::Approx(b5 * b9));
  CHECK(claim_payoff(ClaimSpec::parse("custom_marks:sum_squares:0.5:0.9"), path) ==
        doctest::Approx(b5 * b5 + b9 * b9));
  CHECK(claim_payoff(ClaimSpec::parse("custom_marks:abs:0.9"), path) == doctest::Approx(std::abs(b9)));
  CHECK(claim_payoff(ClaimSpec::parse("custom_marks:step:0.4"), path) == (path.at(0.4) > 0.0 ? 1.0 : 0.0));
  CHECK(claim_payoff(ClaimSpec::parse("zero"), path) == 0.0);

  CHECK(ClaimSpec::parse("custom_marks:step:0.4").kind == ClaimKind::indicator);
  CHECK(ClaimSpec::parse("lookback_max:0.9").kind == ClaimKind::sup_functional);
  CHECK_THROWS_AS(ClaimSpec::parse("digital:1:1.0"), ConfigError);
  CHECK_THROWS_AS(ClaimSpec::parse("custom_marks:step:1"), ConfigError);
  CHECK_THROWS_AS(ClaimSpec::parse("no_such_claim"), ConfigError);
  CHECK_THROWS_AS(ClaimSpec::parse("custom_marks:square:1.5"), ConfigError);

  // the adapted process freezes each mark at min(mark, t) and ends at the payoff
  const ClaimSpec sq = ClaimSpec::parse("custom_marks:sum:0.5:0.9");
  CHECK(claim_to_adapted_process(sq, path, 1.0) == doctest::Approx(claim_payoff(sq, path)));
  CHECK(claim_to_adapted_process(sq, path, 0.75) == doctest::Approx(b5 + path.at(0.75)));
  CHECK(claim_to_adapted_process(sq, path, 0.0) == 0.0);
  const std::vector<std::size_t> at{0, g.index_of(0.25), g.index_of(0.9), g.size() - 1};
  const auto z = claim_values_at(sq, path, at);
  CHECK(z[1] == doctest::Approx(2.0 * path.at(0.25)));
  CHECK(z[3] == doctest::Approx(b5 + b9));
}
