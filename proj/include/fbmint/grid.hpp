#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fbmint/fbm.hpp"

namespace fbmint {

double zeta(double gamma);

// Blocks t_n = origin + length * sum_{k<=n} k^{-gamma}/zeta(gamma), n <= n_max.
struct BlockPartition {
  double gamma = 1.2;
  double zeta_gamma = 0.0;
  double origin = 0.0;
  double length = 1.0;
  int n_max = 0;
  int points_per_block = 32;
  std::vector<double> delta;  // delta[n] for n >= 1, delta[0] = 0
  std::vector<double> t;      // t[0] = origin ... t[n_max]

  BlockPartition() = default;
  BlockPartition(double gamma, int n_max, int points_per_block = 32, double origin = 0.0,
                 double length = 1.0);

  // largest n with length * Delta_n >= min_block
  static int blocks_above(double gamma, double length, double min_block);

  // nearest grid indices of t_0..t_n, cut where they stop increasing
  std::vector<std::size_t> realize(const TimeGrid& grid) const;
};

// Nested partition used inside one block of an outer partition
struct NestedSpec {
  double gamma = 1.2;
  int k_max = 8;
  int points_per_sub = 16;
};

// Shared by the grid builder and the constructions so both place the nested
// bounds identically.
BlockPartition nested_partition(double u, double v, const NestedSpec& spec);

struct PartitionLayout {
  BlockPartition partition;
  std::optional<NestedSpec> nested;
};

struct GridRequest {
  std::size_t base_n = 1024;
  std::vector<double> marks;
  std::vector<PartitionLayout> layouts;
};

enum class GridMode { automatic, lattice, exact };

TimeGrid build_grid(const GridRequest& request, GridMode mode = GridMode::automatic);

}  // namespace fbmint
