#include "robayes/mixtures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace robayes {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_simplex(const std::vector<double>& w) {
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(Errc::invalid_argument, "weights must be finite and non-negative");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-10) throw Error(Errc::invalid_argument, "weights must sum to one");
}

}  // namespace

DiscreteDistribution::DiscreteDistribution(std::vector<double> support, std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.size() != weights_.size()) throw Error(Errc::length_mismatch, "support and weights differ in length");
  if (support_.empty()) throw Error(Errc::empty_support, "distribution has no support");
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (!std::isfinite(support_[i])) throw Error(Errc::invalid_argument, "support point is not finite");
    if (i > 0 && !(support_[i] > support_[i - 1]))
      throw Error(Errc::invalid_argument, "support must be sorted without duplicates");
  }
  check_simplex(weights_);
}

DiscreteDistribution DiscreteDistribution::normalized(std::vector<double> support, std::vector<double> weights) {
  if (support.size() != weights.size()) throw Error(Errc::length_mismatch, "support and weights differ in length");
  std::vector<std::size_t> idx(support.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
  DiscreteDistribution d;
  double total = 0.0;
  for (std::size_t i : idx) {
    const double w = weights[i];
    if (!std::isfinite(w) || w < 0.0 || !std::isfinite(support[i]))
      throw Error(Errc::invalid_argument, "weights must be finite and non-negative");
    if (w == 0.0) continue;
    if (!d.support_.empty() && d.support_.back() == support[i]) {
      d.weights_.back() += w;
    } else {
      d.support_.push_back(support[i]);
      d.weights_.push_back(w);
    }
    total += w;
  }
  if (d.support_.empty() || !(total > 0.0)) throw Error(Errc::empty_support, "all weights are zero");
  for (double& w : d.weights_) w /= total;
  return d;
}

DiscreteDistribution DiscreteDistribution::dirac(double c) { return DiscreteDistribution({c}, {1.0}); }

DiscreteDistribution DiscreteDistribution::two_point(double a) {
  if (!(a > 0.0)) throw Error(Errc::invalid_argument, "two-point prior needs a > 0");
  return DiscreteDistribution({-a, a}, {0.5, 0.5});
}

DiscreteDistribution DiscreteDistribution::gaussian_grid(double variance, double mean, std::size_t n, double span_sd) {
  if (!(variance > 0.0) || n < 3 || !(span_sd > 0.0))
    throw Error(Errc::invalid_argument, "gaussian grid needs positive variance, span and n >= 3");
  const double sd = std::sqrt(variance);
  const Grid g = make_uniform_grid(mean - span_sd * sd, mean + span_sd * sd, n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = normal_pdf((g[i] - mean) / sd);
  return normalized(g.values(), std::move(w));
}

DiscreteDistribution DiscreteDistribution::uniform_grid(double lo, double hi, std::size_t n) {
  const Grid g = make_uniform_grid(lo, hi, n);
  return normalized(g.values(), std::vector<double>(n, 1.0));
}

DiscreteDistribution DiscreteDistribution::contaminate(const DiscreteDistribution& base, double eps,
                                                       const DiscreteDistribution& other) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw Error(Errc::invalid_epsilon, "contamination fraction must lie in [0, 1]");
  std::vector<double> s = base.support_, w = base.weights_;
  for (double& x : w) x *= 1.0 - eps;
  for (std::size_t i = 0; i < other.size(); ++i) {
    s.push_back(other.support_[i]);
    w.push_back(eps * other.weights_[i]);
  }
  return normalized(std::move(s), std::move(w));
}

double DiscreteDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m += weights_[i] * support_[i];
  return m;
}

double DiscreteDistribution::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < size(); ++i) v += weights_[i] * (support_[i] - m) * (support_[i] - m);
  return v;
}

DiscreteDistribution DiscreteDistribution::pruned(double min_weight) const {
  std::vector<double> s, w;
  for (std::size_t i = 0; i < size(); ++i)
    if (weights_[i] > min_weight) {
      s.push_back(support_[i]);
      w.push_back(weights_[i]);
    }
  if (s.empty()) throw Error(Errc::empty_support, "no atom exceeds the weight threshold");
  return normalized(std::move(s), std::move(w));
}

// ---------------------------------------------------------------------------
// Noise kernels

struct NoiseKernel::Table {
  double x0, h;
  std::vector<double> logd, score;

  double eval(double u, int deriv) const {
    const std::size_t n = logd.size();
    const double xn = x0 + h * double(n - 1);
    if (u <= x0) {
      if (deriv == 0) return logd.front() + score.front() * (u - x0);
      return deriv == 1 ? score.front() : 0.0;
    }
    if (u >= xn) {
      if (deriv == 0) return logd.back() + score.back() * (u - xn);
      return deriv == 1 ? score.back() : 0.0;
    }
    std::size_t i = std::min<std::size_t>(std::size_t((u - x0) / h), n - 2);
    const double t = (u - (x0 + h * double(i))) / h;
    const double y0 = logd[i], y1 = logd[i + 1], m0 = h * score[i], m1 = h * score[i + 1];
    const double t2 = t * t, t3 = t2 * t;
    switch (deriv) {
      case 0:
        return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
      case 1:
        return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1) / h;
      default:
        return ((12 * t - 6) * y0 + (6 * t - 4) * m0 + (-12 * t + 6) * y1 + (6 * t - 2) * m1) / (h * h);
    }
  }
};

NoiseKernel NoiseKernel::gaussian() { return NoiseKernel(); }

NoiseKernel NoiseKernel::laplace(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(Errc::invalid_argument, "laplace scale must be positive");
  NoiseKernel k;
  k.kind_ = Kind::laplace;
  k.a_ = scale;
  k.log_c0_ = -std::log(2.0 * scale);
  k.label_ = "laplace";
  return k;
}

NoiseKernel NoiseKernel::huber(double kk, double eps) {
  if (!(kk > 0.0)) throw Error(Errc::invalid_argument, "huber k must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::invalid_epsilon, "huber eps must lie in (0, 1)");
  NoiseKernel k;
  k.kind_ = Kind::huber;
  k.a_ = kk;
  k.b_ = eps;
  k.log_c0_ = std::log1p(-eps);
  k.label_ = "huber";
  return k;
}

NoiseKernel NoiseKernel::contaminated_normal(double p, double s) {
  if (!(p >= 0.0 && p < 1.0) || !(s > 0.0)) throw Error(Errc::invalid_argument, "contaminated normal needs p in [0,1), s > 0");
  NoiseKernel k;
  k.kind_ = Kind::contaminated_normal;
  k.a_ = s;
  k.b_ = p;
  k.log_c0_ = std::log1p(-p);
  k.log_c1_ = p > 0.0 ? std::log(p / s) : kNegInf;
  k.label_ = "contaminated_normal";
  return k;
}

NoiseKernel NoiseKernel::tabulated(const Grid& grid, std::span<const double> density, std::span<const double> score,
                                   std::string label) {
  if (density.size() != grid.size() || score.size() != grid.size())
    throw Error(Errc::length_mismatch, "tabulated kernel values differ in length from the grid");
  auto t = std::make_shared<Table>();
  t->x0 = grid.front();
  t->h = grid.require_spacing();
  t->logd.resize(grid.size());
  t->score.assign(score.begin(), score.end());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(density[i] >= 0.0) || !std::isfinite(score[i]))
      throw Error(Errc::invalid_argument, "tabulated kernel needs non-negative density and finite score");
    t->logd[i] = std::log(std::max(density[i], kDensityFloor));
  }
  NoiseKernel k;
  k.kind_ = Kind::tabulated;
  k.table_ = std::move(t);
  k.label_ = std::move(label);
  return k;
}

double NoiseKernel::log_density(double u) const {
  switch (kind_) {
    case Kind::gaussian: return normal_log_pdf(u);
    case Kind::laplace: return log_c0_ - std::abs(u) / a_;
    case Kind::huber: {
      const double au = std::abs(u);
      if (au <= a_) return log_c0_ + normal_log_pdf(u);
      return log_c0_ + normal_log_pdf(a_) - a_ * (au - a_);
    }
    case Kind::contaminated_normal: {
      const double l0 = log_c0_ + normal_log_pdf(u);
      const double l1 = log_c1_ + normal_log_pdf(u / a_);
      const double m = std::max(l0, l1);
      return m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    }
    case Kind::tabulated: return table_->eval(u, 0);
  }
  return kNegInf;
}

double NoiseKernel::score(double u) const {
  switch (kind_) {
    case Kind::gaussian: return -u;
    case Kind::laplace: return u > 0.0 ? -1.0 / a_ : 1.0 / a_;
    case Kind::huber:
      if (u > a_) return -a_;
      if (u <= -a_) return a_;
      return -u;
    case Kind::contaminated_normal: {
      const double l0 = log_c0_ + normal_log_pdf(u);
      const double l1 = log_c1_ + normal_log_pdf(u / a_);
      const double m = std::max(l0, l1);
      const double r0 = std::exp(l0 - m), r1 = std::exp(l1 - m);
      return (r0 * (-u) + r1 * (-u / (a_ * a_))) / (r0 + r1);
    }
    case Kind::tabulated: return table_->eval(u, 1);
  }
  return 0.0;
}

double NoiseKernel::score_derivative(double u) const {
  switch (kind_) {
    case Kind::gaussian: return -1.0;
    case Kind::laplace: return 0.0;
    case Kind::huber: return (u > -a_ && u <= a_) ? -1.0 : 0.0;
    case Kind::contaminated_normal: {
      const double l0 = log_c0_ + normal_log_pdf(u);
      const double l1 = log_c1_ + normal_log_pdf(u / a_);
      const double m = std::max(l0, l1);
      double r0 = std::exp(l0 - m), r1 = std::exp(l1 - m);
      const double z = r0 + r1;
      r0 /= z;
      r1 /= z;
      const double s0 = -u, s1 = -u / (a_ * a_);
      const double sbar = r0 * s0 + r1 * s1;
      return r0 * (-1.0) + r1 * (-1.0 / (a_ * a_)) + r0 * (s0 - sbar) * (s0 - sbar) + r1 * (s1 - sbar) * (s1 - sbar);
    }
    case Kind::tabulated: return table_->eval(u, 2);
  }
  return 0.0;
}

double huber_k(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::invalid_epsilon, "eps must lie in (0, 1)");
  const double target = eps / (1.0 - eps);
  auto link = [target](double k) { return 2.0 * normal_pdf(k) / k - 2.0 * normal_cdf(-k) - target; };
  // The link is decreasing in k, +inf at 0 and 0 at infinity.
  double lo = 1e-3, hi = 10.0;
  while (link(lo) < 0.0 && lo > 1e-300) lo *= 1e-3;
  while (link(hi) > 0.0 && hi < 60.0) hi *= 1.5;
  return bracketed_root(link, lo, hi, 1e-14);
}

NoiseKernel huber_noise_kernel(double eps) { return NoiseKernel::huber(huber_k(eps), eps); }
NoiseKernel laplace_noise_kernel(double scale) { return NoiseKernel::laplace(scale); }

// ---------------------------------------------------------------------------
// Mixture density

MixtureDensity::MixtureDensity(NoiseKernel kernel, DiscreteDistribution mixing)
    : kernel_(std::move(kernel)), mixing_(std::move(mixing)) {
  for (std::size_t j = 0; j < mixing_.size(); ++j) {
    const double w = mixing_.weights()[j];
    if (w > 0.0) {
      theta_.push_back(mixing_.support()[j]);
      logw_.push_back(std::log(w));
    }
  }
}

namespace {
thread_local std::vector<double> tl_l, tl_s, tl_ds;
}

double MixtureDensity::log_density(double x) const {
  const std::size_t m = theta_.size();
  tl_l.resize(m);
  double mx = kNegInf;
  const bool gauss = kernel_.kind() == NoiseKernel::Kind::gaussian;
  for (std::size_t j = 0; j < m; ++j) {
    const double u = x - theta_[j];
    const double l = logw_[j] + (gauss ? -0.5 * u * u : kernel_.log_density(u));
    tl_l[j] = l;
    mx = std::max(mx, l);
  }
  if (!std::isfinite(mx)) return kNegInf;
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) s += std::exp(tl_l[j] - mx);
  return mx + std::log(s) - (gauss ? kLogSqrt2Pi : 0.0);
}

double MixtureDensity::density(double x) const { return std::exp(log_density(x)); }

PosteriorSummary MixtureDensity::summarize(double x) const {
  const std::size_t m = theta_.size();
  tl_l.resize(m);
  tl_s.resize(m);
  tl_ds.resize(m);
  const bool gauss = kernel_.kind() == NoiseKernel::Kind::gaussian;
  double mx = kNegInf;
  for (std::size_t j = 0; j < m; ++j) {
    const double u = x - theta_[j];
    double l;
    if (gauss) {
      l = logw_[j] - 0.5 * u * u;
      tl_s[j] = -u;
      tl_ds[j] = -1.0;
    } else {
      l = logw_[j] + kernel_.log_density(u);
      tl_s[j] = kernel_.score(u);
      tl_ds[j] = kernel_.score_derivative(u);
    }
    tl_l[j] = l;
    mx = std::max(mx, l);
  }
  PosteriorSummary out{};
  if (!std::isfinite(mx)) {
    out.log_density = kNegInf;
    return out;
  }
  double z = 0.0, sbar = 0.0, tbar = 0.0, dsbar = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double r = std::exp(tl_l[j] - mx);
    tl_l[j] = r;
    z += r;
    sbar += r * tl_s[j];
    tbar += r * theta_[j];
    dsbar += r * tl_ds[j];
  }
  sbar /= z;
  tbar /= z;
  dsbar /= z;
  double vs = 0.0, cts = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double r = tl_l[j] / z;
    const double ds = tl_s[j] - sbar;
    vs += r * ds * ds;
    cts += r * (theta_[j] - tbar) * ds;
  }
  out.log_density = mx + std::log(z) - (gauss ? kLogSqrt2Pi : 0.0);
  out.score = sbar;
  out.score_derivative = dsbar + vs;
  out.mean = tbar;
  out.mean_derivative = cts;
  return out;
}

double MixtureDensity::score(double x) const { return summarize(x).score; }
double MixtureDensity::score_derivative(double x) const { return summarize(x).score_derivative; }
double MixtureDensity::posterior_mean(double x) const { return summarize(x).mean; }

std::vector<double> MixtureDensity::tabulate(const Grid& grid) const {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = density(grid[i]);
  return v;
}

// ---------------------------------------------------------------------------
// Rules

DecisionRule identity_rule() {
  return DecisionRule{[](double) { return 0.0; }, [](double) { return 0.0; }, "mle"};
}

DecisionRule constant_rule(double c) {
  return DecisionRule{[c](double x) { return c - x; }, [](double) { return -1.0; }, "constant"};
}

DecisionRule tweedie_rule(std::shared_ptr<const MixtureDensity> m, std::string label) {
  if (m->kernel().kind() == NoiseKernel::Kind::gaussian) {
    return DecisionRule{[m](double x) { return m->summarize(x).score; },
                        [m](double x) { return m->summarize(x).score_derivative; }, std::move(label)};
  }
  return DecisionRule{[m](double x) { return m->summarize(x).mean - x; },
                      [m](double x) { return m->summarize(x).mean_derivative - 1.0; }, std::move(label)};
}

DecisionRule tweedie_rule(const MixtureDensity& m, std::string label) {
  return tweedie_rule(std::make_shared<const MixtureDensity>(m), std::move(label));
}

DecisionRule tabulated_rule(const Grid& grid, std::vector<double> score, std::string label) {
  if (score.size() != grid.size()) throw Error(Errc::length_mismatch, "score table differs in length from the grid");
  auto g = std::make_shared<const Grid>(grid);
  auto s = std::make_shared<const std::vector<double>>(std::move(score));
  auto deriv = [g, s](double x) {
    const auto p = g->points();
    if (x <= p.front() || x >= p.back()) return 0.0;
    const std::size_t i = std::size_t(std::upper_bound(p.begin(), p.end(), x) - p.begin()) - 1;
    return ((*s)[i + 1] - (*s)[i]) / (p[i + 1] - p[i]);
  };
  return DecisionRule{[g, s](double x) { return interp_linear(*g, *s, x); }, deriv, std::move(label)};
}

double fisher_information_grid(std::span<const double> values, const Grid& grid, double density_floor) {
  if (values.size() != grid.size()) throw Error(Errc::length_mismatch, "values and grid differ in length");
  const double dx = grid.require_spacing();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    if (values[i] < 0.0 || values[i + 1] < 0.0) throw Error(Errc::invalid_argument, "density values must be non-negative");
    const double v = 0.5 * (values[i + 1] + values[i]);
    if (v < density_floor) continue;
    const double u = values[i + 1] - values[i];
    acc += u * u / (dx * v);
  }
  return acc;
}

double fisher_information_mixture(const MixtureDensity& m, const Grid& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const PosteriorSummary p = m.summarize(grid[i]);
    const double f = std::exp(p.log_density);
    v[i] = f > 0.0 ? f * p.score * p.score : 0.0;
  }
  return trapezoid_integral(v, grid);
}

std::vector<RuleTableRow> rule_table(const DecisionRule& rule, const Grid& grid, std::span<const double> density) {
  if (!density.empty() && density.size() != grid.size())
    throw Error(Errc::length_mismatch, "density table differs in length from the grid");
  std::vector<RuleTableRow> rows(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = rule.score(grid[i]);
    rows[i] = {grid[i], density.empty() ? std::nan("") : density[i], s, grid[i] + s};
  }
  return rows;
}

}  // namespace robayes
