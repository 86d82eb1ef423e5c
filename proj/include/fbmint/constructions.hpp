#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fbmint/claims.hpp"
#include "fbmint/distributions.hpp"
#include "fbmint/fbm.hpp"
#include "fbmint/frac_calc.hpp"
#include "fbmint/grid.hpp"

namespace fbmint {

// power: f(x) = (1+beta)|x|^beta sign x, primitive |x|^{1+beta}
// sign:  f(x) = sign x, primitive |x|
enum class Kernel { power, sign };

double kernel_value(Kernel k, double beta, double x);
double kernel_primitive(Kernel k, double beta, double x);

// What the integrand is integrated against: sigma dB + drift dt.
struct Driver {
  double sigma = 1.0;
  std::vector<double> drift;  // on the grid; empty for none
};

// One piece of integrand amp * direction * f(B_t - B_start) on [start, end],
// switched off at the first grid point where |B - B_start| >= threshold or
// where the running value reaches target (exact-hit rescaled last cell).
struct SegmentSpec {
  std::size_t start = 0;
  std::size_t end = 0;
  Kernel kernel = Kernel::power;
  double beta = 0.1;
  double amp = 1.0;
  double direction = 1.0;
  double threshold = INFINITY;
  std::optional<double> target;
};

struct SegmentOutcome {
  std::size_t stop = 0;
  bool threshold_hit = false;
  bool target_hit = false;
};

// Builds an integrand segment by segment and keeps its running integral in
// closed form on the grid skeleton.
class RunningIntegral {
 public:
  RunningIntegral(const FbmPath& path, Driver driver = {}, double start_value = 0.0);

  SegmentOutcome run(const SegmentSpec& seg);
  double value() const { return running_[cursor_]; }
  std::size_t cursor() const { return cursor_; }
  const FbmPath& path() const { return *path_; }

  // constant continuation to the end of the grid
  std::pair<Integrand, std::vector<double>> finish();

 private:
  const FbmPath* path_;
  Driver driver_;
  Integrand integrand_;
  std::vector<double> running_;
  std::size_t cursor_ = 0;
};

enum class CaseLabel { none, A, B };
std::string to_string(CaseLabel c);

struct StoppingRecord {
  int block = 0;
  double tau = 0.0;
  std::size_t tau_index = 0;
  bool triggered = false;
  CaseLabel case_label = CaseLabel::none;
};

struct DivergentParams {
  double gamma = 1.2;
  double beta = 0.1;
  BlockPartition partition;
  double scale = 1.0;  // amplitude multiplier, keeps divergence

  DivergentParams() = default;
  DivergentParams(double gamma, double beta, int n_max, int points_per_block = 32, double scale = 1.0);

  // 1 < gamma < 1/H and 0 < beta < 1/(gamma H) - 1
  void validate(HurstParam h) const;
};

// Divergent blocks placed inside an interval and stopped at a level.
struct NestedDivergent {
  NestedSpec spec;
  double beta = 0.1;
  double scale = 1.0;

  void validate(HurstParam h) const;
};

struct TargetRun {
  bool resolved = false;
  std::size_t stop = 0;
  int blocks_used = 0;
};

// Runs divergent blocks of `part` (amplitude scale * L^{-H(1+beta)}, thresholds
// n^{-1/(1+beta)} L^H with L the partition length) until the running value
// reaches target.
TargetRun drive_to_target(RunningIntegral& acc, const BlockPartition& part, double beta, double scale,
                          double target, std::vector<StoppingRecord>* log = nullptr,
                          std::size_t last_index = static_cast<std::size_t>(-1));

struct DivergentResult {
  Integrand integrand;
  std::vector<double> running;
  std::vector<StoppingRecord> records;
  std::vector<std::size_t> block_indices;
};

DivergentResult build_divergent_integrand(const FbmPath& path, const DivergentParams& params);

// (t_n, v_{t_n}) for the realized blocks, starting with (0, 0)
std::vector<std::pair<double, double>> divergence_profile(const FbmPath& path, const DivergentParams& params);

PartitionLayout divergent_layout(const DivergentParams& params);

struct PrescribedResult {
  Integrand integrand;
  std::vector<double> running;
  double target = 0.0;
  double terminal = 0.0;
  double tau = 1.0;
  std::size_t tau_index = 0;
  bool resolved = false;
  std::vector<StoppingRecord> records;
};

// partition of params moved onto [1/2, 1]
BlockPartition half_partition(const DivergentParams& params);
PartitionLayout distribution_layout(const DivergentParams& params);

// transport maps B_{1/2} to the terminal target
PrescribedResult prescribed_distribution_integrand(const FbmPath& path,
                                                   const std::function<double(double)>& transport,
                                                   const DivergentParams& params, const Driver& driver = {});
PrescribedResult prescribed_distribution_integrand(const FbmPath& path, const TargetDistribution& target,
                                                   const DivergentParams& params, const Driver& driver = {});

struct ImproperResult {
  Integrand integrand;
  std::vector<double> x;               // running integral
  std::vector<std::size_t> outer_indices;
  std::vector<bool> resolved;          // per outer block [t_n, t_{n+1}]
  std::vector<StoppingRecord> records;
};

// Block [t_n, t_{n+1}] of `outer` drives the running value to xi[n]; xi[n] must
// depend on the path up to t_n only.
ImproperResult improper_representation(const FbmPath& path, const std::vector<double>& xi,
                                       const BlockPartition& outer, const NestedDivergent& nested,
                                       const Driver& driver = {}, double start_value = 0.0);

// xi_n at the realized outer bounds, read from an adapted evaluator at grid indices
std::vector<double> approximator_at_blocks(const FbmPath& path, const BlockPartition& outer,
                                           const std::function<double(const FbmPath&, std::size_t)>& z);

PartitionLayout improper_layout(const BlockPartition& outer, const NestedDivergent& nested);

struct ReplicationParams {
  double a = 0.42;
  AlphaParam alpha;
  double gamma = 6.25;
  double kappa = 2.25;
  double b = 0.38;

  // alpha in (1-H, min(1-H+a, 1/2)), gamma > 1/(1-alpha-H+a),
  // kappa in (gamma(H-a), gamma(1-alpha)-1), b in (H-kappa/gamma, a)
  void validate(HurstParam h) const;
};

ReplicationParams choose_replication_params(HurstParam h, double a);

struct ReplicationSetup {
  int n_max = 16;
  int points_per_block = 32;
  NestedDivergent fallback{NestedSpec{1.2, 8, 16}, 0.1, 50.0};
};

PartitionLayout replication_layout(const ReplicationParams& params, const ReplicationSetup& setup);

struct ReplicationResult {
  Integrand integrand;
  std::vector<double> running;
  double terminal = 0.0;
  std::vector<StoppingRecord> case_log;
  std::vector<std::size_t> block_indices;
  std::vector<double> xi;
  // Case A blocks where other trigger rules would pick a different stop
  int verbatim_rule_changes = 0;
  int driftless_rule_changes = 0;
};

// Block k on [t_{k-1}, t_k] drives the running value to xi[k-1], with
// amplitude (k - amp_offset)^kappa; block 1 carries no integrand.
ReplicationResult replicate_sequence(const FbmPath& path, const std::vector<double>& xi,
                                     const ReplicationParams& params, const ReplicationSetup& setup,
                                     const Driver& driver = {}, double start_value = 0.0,
                                     int amp_offset = 0);

ReplicationResult replicate_holder_claim(const FbmPath& path, const ClaimSpec& claim,
                                         const ReplicationParams& params, const ReplicationSetup& setup = {});

// fraction of realized blocks in the terminal half that ran Case B
double case_b_fraction(const std::vector<StoppingRecord>& log, int n_blocks);

}  // namespace fbmint
