#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "fbmint/fbm.hpp"

namespace fbmint {

inline constexpr double overflow_guard = 1e12;

struct AlphaParam {
  double alpha = 0.42;

  AlphaParam() = default;
  explicit AlphaParam(double value);

  // 1-H < alpha < 1/2
  void require_window(HurstParam h) const;
};

AlphaParam default_alpha(HurstParam h);

// Overrides the endpoint values of the cell index -> index+1, used where a
// stopping rule ends (and possibly rescales) the integrand inside that cell.
// The sample at index+1 applies only from there on. Decided at grid time index+1.
struct StepClose {
  std::size_t index = 0;
  double left = 0.0;
  double right = 0.0;
  double factor = 1.0;  // exact-hit rescaling applied to the natural values
};

// Samples of an adapted process on a grid, read as the piecewise-linear
// interpolant; closes may insert a jump at a stopping point.
struct Integrand {
  TimeGrid grid;
  std::vector<double> values;
  std::vector<StepClose> closes;  // sorted by index, at most one per cell

  static Integrand zeros(const TimeGrid& grid);

  // left and right endpoint values of cell i
  std::pair<double, double> cell(std::size_t i) const;
  // pointwise product with a sampled weight, closes included
  Integrand scaled(const std::vector<double>& weight) const;
  Integrand operator+(const Integrand& other) const;
  Integrand operator*(double c) const;
  void add_close(StepClose c);
};

Integrand sample_function(const FbmPath& path, const std::function<double(double)>& f);

struct GlsOptions {
  int nodes_per_cell = 8;
};

// left Riemann-Liouville derivative of the interpolated integrand at x
double frac_deriv_left(const Integrand& f, double a, AlphaParam alpha, double x);

// right derivative of the interpolated path reduced by its value at b
double frac_deriv_right_fbm(const FbmPath& path, double b, AlphaParam alpha, double x);

// pathwise integral over [a,b] (both grid points) through the product of the
// two fractional derivatives
double gls_integral(const Integrand& f, const FbmPath& path, double a, double b, AlphaParam alpha,
                    GlsOptions opt = {});

// running integral at every grid point; exact for the interpolants
std::vector<double> gls_running(const Integrand& f, const FbmPath& path);

double norm_1_alpha(const Integrand& f, double a, double b, AlphaParam alpha, GlsOptions opt = {});

struct BoundReport {
  double lhs = 0.0;
  double k_alpha = 0.0;
  double norm = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline constexpr double bound_quadrature_slack = 1e-2;

BoundReport integral_bound_check(const Integrand& f, const FbmPath& path, double t, AlphaParam alpha);

// Left Riemann-Stieltjes sum, for comparison in the Young regime
double left_riemann_sum(const Integrand& f, const FbmPath& path, double a, double b);

}  // namespace fbmint
