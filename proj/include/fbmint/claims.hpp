#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fbmint/fbm.hpp"

namespace fbmint {

struct StockModel {
  double s0 = 1.0;
  double mu = 0.1;
  double sigma = 0.2;

  double price(double t, double b) const;
};

enum class ClaimKind { functional_of_marks, sup_functional, indicator, terminal_adapted_process };

// Catalog keys:
//   european_call:<s>:<K>        (S_s - K)^+
//   asian_mean:<k>               mean of S at i/k, i = 1..k
//   digital:<s>:<level>          1{S_s > level}, s < 1
//   barrier:<s>:<level>          1{max_{u<=s} S_u > level}, s < 1
//   lookback_max:<s>             max_{u<=s} S_u
//   custom_marks:<fn>:<s1>[:..]  fn of fBm values at marks; fn in
//                                square identity abs step sum sum_squares product
//   zero
struct ClaimSpec {
  ClaimKind kind = ClaimKind::terminal_adapted_process;
  std::string key = "zero";
  std::vector<double> marks;
  bool on_stock = false;     // payload reads S rather than B
  bool running_max = false;  // payload sees max_{u<=s} instead of the value at s
  StockModel stock;
  // payload of the (stopped) mark values, or of the running max for sup kinds
  std::function<double(const std::vector<double>&)> payload;
  double holder_a = 0.0;  // 0 means "use 0.6 H"

  static ClaimSpec parse(const std::string& key, const StockModel& stock = {});
  double holder_exponent(HurstParam h) const { return holder_a > 0.0 ? holder_a : 0.6 * h.h; }
};

// z_t: the claim with every mark s replaced by s ^ t
double claim_to_adapted_process(const ClaimSpec& claim, const FbmPath& path, double t);
double claim_payoff(const ClaimSpec& claim, const FbmPath& path);
// z at grid indices; reads only path values at or before each index
std::vector<double> claim_values_at(const ClaimSpec& claim, const FbmPath& path,
                                    const std::vector<std::size_t>& indices);

}  // namespace fbmint
