#include "robayes/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <limits>

namespace robayes {

Grid::Grid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.size() < 3) throw Error(Errc::invalid_range, "grid needs at least 3 points");
  for (double p : points_)
    if (!std::isfinite(p)) throw Error(Errc::invalid_range, "grid point is not finite");
  for (std::size_t i = 1; i < points_.size(); ++i)
    if (!(points_[i] > points_[i - 1])) throw Error(Errc::invalid_range, "grid points must be strictly increasing");
  const double h = (points_.back() - points_.front()) / double(points_.size() - 1);
  bool uni = true;
  for (std::size_t i = 1; i < points_.size() && uni; ++i)
    uni = std::abs(points_[i] - points_[i - 1] - h) < 1e-12;
  if (uni) spacing_ = h;
}

double Grid::require_spacing() const {
  if (!spacing_) throw Error(Errc::non_uniform_grid, "operation requires a uniform grid");
  return *spacing_;
}

Grid make_uniform_grid(double lo, double hi, std::size_t n) {
  if (!(lo < hi) || n < 3 || !std::isfinite(lo) || !std::isfinite(hi))
    throw Error(Errc::invalid_range, "make_uniform_grid needs lo < hi and n >= 3");
  std::vector<double> p(n);
  const double h = (hi - lo) / double(n - 1);
  for (std::size_t i = 0; i < n; ++i) p[i] = lo + h * double(i);
  p.back() = hi;
  return Grid(std::move(p));
}

Grid default_f_grid() { return make_uniform_grid(-30.0, 30.0, 500); }
Grid default_theta_grid() { return make_uniform_grid(-20.0, 20.0, 4003); }

namespace {

// Orthonormal Hermite (probabilists') values p_{n-1}, p_n at x.
void hermite_pair(std::size_t n, double x, double& pn, double& pn1) {
  double pm = 0.0, p = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double next = (x * p - std::sqrt(double(k)) * pm) / std::sqrt(double(k + 1));
    pm = p;
    p = next;
  }
  pn = p;
  pn1 = pm;
}

}  // namespace

QuadratureRule gauss_hermite_rule(std::size_t order) {
  if (order < 1 || order > 300) throw Error(Errc::invalid_argument, "Gauss-Hermite order must be in [1, 300]");
  const auto n = static_cast<Eigen::Index>(order);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadratureRule r;
  r.nodes.resize(order);
  r.weights.resize(order);
  for (std::size_t i = 0; i < order; ++i) {
    double x = es.eigenvalues()(Eigen::Index(i));
    // Newton polish on p_n; p_n' = sqrt(n) p_{n-1}.
    for (int it = 0; it < 4; ++it) {
      double pn, pn1;
      hermite_pair(order, x, pn, pn1);
      const double d = std::sqrt(double(order)) * pn1;
      if (d == 0.0) break;
      x -= pn / d;
    }
    // Christoffel weight 1 / sum_k p_k(x)^2.
    double s = 0.0, pm = 0.0, p = 1.0;
    for (std::size_t k = 0; k < order; ++k) {
      s += p * p;
      const double next = (x * p - std::sqrt(double(k)) * pm) / std::sqrt(double(k + 1));
      pm = p;
      p = next;
    }
    r.nodes[i] = x;
    r.weights[i] = 1.0 / s;
  }
  // Symmetrise to remove round-off asymmetry.
  for (std::size_t i = 0, j = order - 1; i < j; ++i, --j) {
    const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    r.weights[i] = r.weights[j] = w;
  }
  if (order % 2 == 1) r.nodes[order / 2] = 0.0;
  return r;
}

QuadratureRule gauss_legendre_rule(std::size_t order) {
  if (order < 1) throw Error(Errc::invalid_argument, "Gauss-Legendre order must be positive");
  const auto n = static_cast<Eigen::Index>(order);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) {
    const double kk = double(k);
    J(k, k - 1) = J(k - 1, k) = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadratureRule r;
  r.nodes.resize(order);
  r.weights.resize(order);
  for (std::size_t i = 0; i < order; ++i) {
    double x = es.eigenvalues()(Eigen::Index(i));
    double dp = 1.0;
    for (int it = 0; it < 4; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * double(k) - 1.0) * x * p1 - (double(k) - 1.0) * p0) / double(k);
        p0 = p1;
        p1 = p2;
      }
      if (order == 1) p0 = 1.0;
      dp = double(order) * (x * p1 - p0) / (x * x - 1.0);
      x -= p1 / dp;
    }
    r.nodes[i] = x;
    r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

QuadratureRule composite_normal_rule(double half_width, std::size_t panels, std::size_t order) {
  if (!(half_width > 0) || panels < 1 || order < 1)
    throw Error(Errc::invalid_argument, "composite rule needs positive width, panels and order");
  const QuadratureRule gl = gauss_legendre_rule(order);
  const double h = 2.0 * half_width / double(panels);
  QuadratureRule r;
  r.nodes.reserve(panels * order);
  r.weights.reserve(panels * order);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = -half_width + h * (double(p) + 0.5);
    for (std::size_t q = 0; q < order; ++q) {
      const double x = mid + 0.5 * h * gl.nodes[q];
      const double w = 0.5 * h * gl.weights[q] * normal_pdf(x);
      r.nodes.push_back(x);
      r.weights.push_back(w);
      total += w;
    }
  }
  for (double& w : r.weights) w /= total;
  return r;
}

QuadratureRule piecewise_normal_rule(std::span<const double> breaks, double half_width, double max_panel,
                                     std::size_t order) {
  if (!(half_width > 0) || !(max_panel > 0) || order < 1)
    throw Error(Errc::invalid_argument, "piecewise rule needs positive width, panel size and order");
  std::vector<double> cuts{-half_width, half_width};
  for (double b : breaks)
    if (b > -half_width && b < half_width) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  thread_local std::size_t gl_order = 0;
  thread_local QuadratureRule gl;
  if (gl_order != order) {
    gl = gauss_legendre_rule(order);
    gl_order = order;
  }
  QuadratureRule r;
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double len = cuts[s + 1] - cuts[s];
    const std::size_t panels = std::max<std::size_t>(1, std::size_t(std::ceil(len / max_panel)));
    const double h = len / double(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double mid = cuts[s] + h * (double(p) + 0.5);
      for (std::size_t q = 0; q < order; ++q) {
        const double x = mid + 0.5 * h * gl.nodes[q];
        const double w = 0.5 * h * gl.weights[q] * normal_pdf(x);
        r.nodes.push_back(x);
        r.weights.push_back(w);
        total += w;
      }
    }
  }
  for (double& w : r.weights) w /= total;
  return r;
}

const QuadratureRule& default_gauss_hermite() {
  static const QuadratureRule rule = gauss_hermite_rule(64);
  return rule;
}

double trapezoid_integral(std::span<const double> values, const Grid& grid) {
  if (values.size() != grid.size()) throw Error(Errc::length_mismatch, "values and grid differ in length");
  const auto x = grid.points();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) acc += 0.5 * (x[i + 1] - x[i]) * (values[i] + values[i + 1]);
  return acc;
}

double bracketed_root(const std::function<double(double)>& fn, double lo, double hi, double tol,
                      int max_iterations) {
  if (!(lo <= hi)) std::swap(lo, hi);
  double flo = fn(lo), fhi = fn(hi);
  if (!std::isfinite(flo) || !std::isfinite(fhi) || flo * fhi > 0)
    throw Error(Errc::no_sign_change, "bracket does not contain a sign change");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  double best = std::abs(flo) < std::abs(fhi) ? lo : hi;
  double fbest = std::min(std::abs(flo), std::abs(fhi));
  for (int it = 0; it < max_iterations; ++it) {
    if (hi - lo <= tol) break;
    // Secant step, falling back to bisection when it lands outside the middle of the bracket.
    double x = hi - fhi * (hi - lo) / (fhi - flo);
    const double w = hi - lo;
    if (!std::isfinite(x) || x <= lo + 0.05 * w || x >= hi - 0.05 * w || it % 3 == 2) x = 0.5 * (lo + hi);
    const double fx = fn(x);
    if (!std::isfinite(fx)) throw Error(Errc::non_finite_integrand, "root function is not finite");
    if (std::abs(fx) < fbest) {
      fbest = std::abs(fx);
      best = x;
    }
    if (fx == 0.0) return x;
    if ((fx < 0) == (flo < 0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
      fhi = fx;
    }
    if (fbest <= tol * 1e-3) break;
  }
  if (hi - lo <= tol) {
    // Prefer the endpoint with the smaller residual inside the final bracket.
    return std::abs(flo) <= std::abs(fhi) ? lo : hi;
  }
  return best;
}

bool grow_bracket(const std::function<double(double)>& fn, double& lo, double& hi, double limit_lo,
                  double limit_hi, int max_expansions) {
  double flo = fn(lo), fhi = fn(hi);
  for (int i = 0; i < max_expansions; ++i) {
    if (std::isfinite(flo) && std::isfinite(fhi) && flo * fhi <= 0) return true;
    const double w = hi - lo;
    if (lo > limit_lo) {
      lo = std::max(limit_lo, lo - w);
      flo = fn(lo);
    }
    if (hi < limit_hi) {
      hi = std::min(limit_hi, hi + w);
      fhi = fn(hi);
    }
    if (lo <= limit_lo && hi >= limit_hi) break;
  }
  return std::isfinite(flo) && std::isfinite(fhi) && flo * fhi <= 0;
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double interp_linear(const Grid& grid, std::span<const double> values, double x) {
  const auto p = grid.points();
  if (x <= p.front()) return values.front();
  if (x >= p.back()) return values.back();
  std::size_t i;
  if (auto h = grid.spacing()) {
    i = std::min<std::size_t>(std::size_t((x - p.front()) / *h), p.size() - 2);
  } else {
    i = std::size_t(std::upper_bound(p.begin(), p.end(), x) - p.begin()) - 1;
  }
  const double t = (x - p[i]) / (p[i + 1] - p[i]);
  return (1.0 - t) * values[i] + t * values[i + 1];
}

}  // namespace robayes
