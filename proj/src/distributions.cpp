#include "fbmint/distributions.hpp"

#include <algorithm>
#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/uniform.hpp>
#include <cmath>
#include <sstream>
#include <vector>

#include "fbmint/errors.hpp"

namespace fbmint {

namespace bm = boost::math;

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double number(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in " + ctx);
  }
}

}  // namespace

TargetDistribution TargetDistribution::parse(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.empty()) throw ConfigError("empty distribution spec");
  TargetDistribution d;
  d.text_ = text;
  auto need = [&](std::size_t n) {
    if (parts.size() != n + 1) throw ConfigError("distribution '" + text + "' expects " + std::to_string(n) + " parameters");
    for (std::size_t i = 0; i < n; ++i) d.p_[i] = number(parts[i + 1], text);
  };
  const std::string& k = parts[0];
  if (k == "exp") {
    need(1);
    d.kind_ = Kind::exponential;
    if (!(d.p_[0] > 0)) throw ConfigError("exponential rate must be positive");
  } else if (k == "normal") {
    need(2);
    d.kind_ = Kind::normal;
    if (!(d.p_[1] > 0)) throw ConfigError("normal variance must be positive");
  } else if (k == "point") {
    need(1);
    d.kind_ = Kind::point;
  } else if (k == "bernoulli") {
    need(3);
    d.kind_ = Kind::bernoulli;
    if (!(d.p_[0] >= 0 && d.p_[0] <= 1)) throw ConfigError("bernoulli probability outside [0,1]");
    if (!(d.p_[1] <= d.p_[2])) throw ConfigError("bernoulli atoms must satisfy lo <= hi");
  } else if (k == "uniform") {
    need(2);
    d.kind_ = Kind::uniform;
    if (!(d.p_[0] < d.p_[1])) throw ConfigError("uniform needs a < b");
  } else {
    throw ConfigError("unknown distribution kind '" + k + "'");
  }
  return d;
}

double TargetDistribution::quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw ArgumentError("quantile level outside [0,1]");
  switch (kind_) {
    case Kind::exponential:
      if (u >= 1.0) return INFINITY;
      return bm::quantile(bm::exponential_distribution<>(p_[0]), u);
    case Kind::normal:
      if (u <= 0.0) return -INFINITY;
      if (u >= 1.0) return INFINITY;
      return bm::quantile(bm::normal_distribution<>(p_[0], std::sqrt(p_[1])), u);
    case Kind::point:
      return p_[0];
    case Kind::bernoulli:
      return u <= 1.0 - p_[0] ? p_[1] : p_[2];
    case Kind::uniform:
      return bm::quantile(bm::uniform_distribution<>(p_[0], p_[1]), u);
  }
  return 0.0;
}

double TargetDistribution::quantile_upper(double q) const {
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile level outside [0,1]");
  switch (kind_) {
    case Kind::exponential:
      if (q <= 0.0) return INFINITY;
      return bm::quantile(bm::complement(bm::exponential_distribution<>(p_[0]), q));
    case Kind::normal:
      if (q <= 0.0) return INFINITY;
      if (q >= 1.0) return -INFINITY;
      return bm::quantile(bm::complement(bm::normal_distribution<>(p_[0], std::sqrt(p_[1])), q));
    case Kind::bernoulli:
      return q < p_[0] ? p_[2] : p_[1];
    default:
      return quantile(1.0 - q);
  }
}

double TargetDistribution::cdf(double x) const {
  switch (kind_) {
    case Kind::exponential:
      return x <= 0.0 ? 0.0 : bm::cdf(bm::exponential_distribution<>(p_[0]), x);
    case Kind::normal:
      return standard_normal_cdf((x - p_[0]) / std::sqrt(p_[1]));
    case Kind::point:
      return x < p_[0] ? 0.0 : 1.0;
    case Kind::bernoulli:
      return x < p_[1] ? 0.0 : (x < p_[2] ? 1.0 - p_[0] : 1.0);
    case Kind::uniform:
      return x <= p_[0] ? 0.0 : (x >= p_[1] ? 1.0 : (x - p_[0]) / (p_[1] - p_[0]));
  }
  return 0.0;
}

double transport_to_target(const TargetDistribution& target, double b_half, HurstParam h) {
  const double z = std::clamp(b_half * std::pow(2.0, h.h), -37.0, 37.0);
  if (z <= 0.0) return target.quantile(standard_normal_cdf(z));
  return target.quantile_upper(standard_normal_cdf(-z));
}

}  // namespace fbmint
