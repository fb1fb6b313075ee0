#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "robayes/error.hpp"

namespace robayes {

inline constexpr double kDensityFloor = 1e-300;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }
inline double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Strictly increasing abscissae; spacing is set when the points are uniform.
class Grid {
 public:
  explicit Grid(std::vector<double> points);

  std::span<const double> points() const { return points_; }
  const std::vector<double>& values() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  std::optional<double> spacing() const { return spacing_; }
  bool uniform() const { return spacing_.has_value(); }
  // Spacing or non-uniform-grid.
  double require_spacing() const;

 private:
  std::vector<double> points_;
  std::optional<double> spacing_;
};

Grid make_uniform_grid(double lo, double hi, std::size_t n);
Grid default_f_grid();      // [-30, 30], 500 points
Grid default_theta_grid();  // [-20, 20], 4003 points

// Rule for E[fn(Z)], Z ~ N(0,1).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

// Probabilists' Gauss-Hermite rule normalised to the standard normal.
QuadratureRule gauss_hermite_rule(std::size_t order = 64);
// Composite Gauss-Legendre rule against the normal density on [-half_width, half_width].
// Suited to integrands with kinks, where a global polynomial rule converges slowly.
QuadratureRule composite_normal_rule(double half_width = 12.0, std::size_t panels = 240,
                                     std::size_t order = 8);
QuadratureRule gauss_legendre_rule(std::size_t order);  // on [-1, 1]
// Composite rule for E[fn(Z)] whose panels also break at the given offsets, so an integrand
// with kinks or jumps there is integrated piecewise smoothly.
QuadratureRule piecewise_normal_rule(std::span<const double> breaks, double half_width = 12.0,
                                     double max_panel = 0.1, std::size_t order = 8);

const QuadratureRule& default_gauss_hermite();

template <class F>
double gaussian_expectation(F&& fn, double theta, const QuadratureRule& rule) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double v = fn(theta + rule.nodes[i]);
    if (!std::isfinite(v)) throw Error(Errc::non_finite_integrand, "integrand is not finite at a node");
    acc += rule.weights[i] * v;
  }
  return acc;
}

double trapezoid_integral(std::span<const double> values, const Grid& grid);

struct RootOptions {
  double tol = 1e-12;
  int max_iterations = 200;
};

// Bisection with secant acceleration. The result always lies in [lo, hi].
double bracketed_root(const std::function<double(double)>& fn, double lo, double hi,
                      double tol = 1e-12, int max_iterations = 200);

// Expands [lo, hi] geometrically away from `anchor` until fn changes sign.
// Returns false if no sign change was found within `max_expansions`.
bool grow_bracket(const std::function<double(double)>& fn, double& lo, double& hi,
                  double limit_lo, double limit_hi, int max_expansions = 60);

double log_sum_exp(std::span<const double> v);

// Linear interpolation on a grid with constant extrapolation beyond the ends.
double interp_linear(const Grid& grid, std::span<const double> values, double x);

}  // namespace robayes
