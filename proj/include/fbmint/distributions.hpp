#pragma once

#include <string>

#include "fbmint/fbm.hpp"

namespace fbmint {

double standard_normal_cdf(double x);

// Target law given by text:
//   exp:<rate>  normal:<mean>:<variance>  point:<a>  bernoulli:<p>:<lo>:<hi>  uniform:<a>:<b>
class TargetDistribution {
 public:
  enum class Kind { exponential, normal, point, bernoulli, uniform };

  static TargetDistribution parse(const std::string& text);

  // generalized inverse F^{-1}(u) and F^{-1}(1-q), the latter accurate for small q
  double quantile(double u) const;
  double quantile_upper(double q) const;
  double cdf(double x) const;
  bool continuous() const { return kind_ != Kind::point && kind_ != Kind::bernoulli; }

  Kind kind() const { return kind_; }
  const std::string& text() const { return text_; }
  double param(int i) const { return p_[i]; }

 private:
  Kind kind_ = Kind::point;
  double p_[3] = {0, 0, 0};
  std::string text_;
};

// g(x) = F^{-1}(Phi(x 2^H)): maps B_{1/2} to the target law
double transport_to_target(const TargetDistribution& target, double b_half, HurstParam h);

}  // namespace fbmint
