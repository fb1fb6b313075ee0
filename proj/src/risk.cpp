#include "robayes/risk.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "robayes/parallel.hpp"

namespace robayes {

namespace {

const QuadratureRule& rule_for(const RiskMethod& m) {
  static const QuadratureRule composite = composite_normal_rule();
  if (m.kind == RiskMethod::Kind::composite) return composite;
  if (m.order == 64) return default_gauss_hermite();
  thread_local std::size_t cached_order = 0;
  thread_local QuadratureRule cached;
  if (cached_order != m.order) {
    cached = gauss_hermite_rule(m.order);
    cached_order = m.order;
  }
  return cached;
}

// Kinked rules lose Gauss-Hermite accuracy, so they get panels that break at the kinks.
template <class F>
double expectation(F&& fn, const DecisionRule& rule, double theta, const RiskMethod& m) {
  if (rule.kinks.empty()) return gaussian_expectation(fn, theta, rule_for(m));
  std::vector<double> offs(rule.kinks.size());
  for (std::size_t i = 0; i < offs.size(); ++i) offs[i] = rule.kinks[i] - theta;
  return gaussian_expectation(fn, theta, piecewise_normal_rule(offs));
}

RiskEstimate monte_carlo_risk(const DecisionRule& rule, double theta, std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw Error(Errc::invalid_argument, "Monte Carlo risk needs at least 2 draws");
  std::seed_seq seq{std::uint32_t(seed & 0xffffffffu), std::uint32_t(seed >> 32), 0x7269736bu};
  std::mt19937_64 gen(seq);
  std::normal_distribution<double> z;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double x = theta + z(gen);
    const double e = rule(x) - theta;
    const double l = e * e;
    if (!std::isfinite(l)) throw Error(Errc::non_finite_integrand, "rule is not finite at a Monte Carlo draw");
    const double d = l - mean;
    mean += d / double(i + 1);
    m2 += d * (l - mean);
  }
  return {mean, std::sqrt(m2 / double(draws - 1) / double(draws))};
}

}  // namespace

std::string RiskMethod::describe() const {
  switch (kind) {
    case Kind::gauss_hermite: return "quadrature(" + std::to_string(order) + ")";
    case Kind::composite: return "quadrature(composite)";
    case Kind::monte_carlo: return "monte_carlo(" + std::to_string(draws) + "," + std::to_string(seed) + ")";
  }
  return "unknown";
}

RiskEstimate pointwise_risk_estimate(const DecisionRule& rule, double theta, const RiskMethod& method) {
  if (method.kind == RiskMethod::Kind::monte_carlo) return monte_carlo_risk(rule, theta, method.draws, method.seed);
  const double v = expectation(
      [&](double x) {
        const double e = rule(x) - theta;
        return e * e;
      },
      rule, theta, method);
  return {v, 0.0};
}

double pointwise_risk(const DecisionRule& rule, double theta, const RiskMethod& method) {
  return pointwise_risk_estimate(rule, theta, method).value;
}

double bayes_risk(const DecisionRule& rule, const DiscreteDistribution& G, const RiskMethod& method) {
  const std::size_t n = G.size();
  std::vector<double> r(n);
  parallel_for(n, [&](std::size_t j) {
    RiskMethod m = method;
    m.seed = method.seed + j;  // distinct stream per atom
    r[j] = pointwise_risk(rule, G.support()[j], m);
  });
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += G.weights()[j] * r[j];
  return acc;
}

double stein_risk(const DecisionRule& rule, double theta, const RiskMethod& method) {
  if (!rule.has_derivative()) throw Error(Errc::missing_derivative, "stein_risk needs the score derivative");
  if (method.kind == RiskMethod::Kind::monte_carlo)
    throw Error(Errc::invalid_argument, "stein_risk is evaluated by quadrature");
  return 1.0 + expectation(
                   [&](double x) {
                     const double g = rule.score(x);
                     return g * g + 2.0 * rule.score_derivative(x);
                   },
                   rule, theta, method);
}

RiskCurve risk_curve(const DecisionRule& rule, const Grid& theta_grid, const RiskMethod& method) {
  const std::size_t n = theta_grid.size();
  std::vector<double> v(n), se(n);
  parallel_for(n, [&](std::size_t i) {
    RiskMethod m = method;
    m.seed = method.seed + i;
    const RiskEstimate e = pointwise_risk_estimate(rule, theta_grid[i], m);
    v[i] = e.value;
    se[i] = e.se;
  });
  const auto it = std::max_element(v.begin(), v.end());
  const std::size_t k = std::size_t(it - v.begin());
  return RiskCurve{theta_grid, std::move(v), std::move(se), method.describe(), *it, theta_grid[k]};
}

WorstRiskReport worst_risk_huber(const HuberSolution& sol) {
  const double k = huber_k(sol);
  const double b = huber_b(sol);
  const Grid g = make_uniform_grid(-(b + 10.0), b + 10.0, 401);
  const RiskCurve c = risk_curve(huber_rule(sol), g, RiskMethod::composite());
  return WorstRiskReport{1.0 + k * k, c.sup, 0.0, "grid_sup", c.arg_sup, c.sup, c.arg_sup, 0};
}

WorstRiskReport worst_risk_mallows(const MallowsSolution& s, const MonteCarloConfig& mc, double atom_tol) {
  DiscreteDistribution atoms = [&] {
    try {
      return extract_mass_points(s, atom_tol);
    } catch (const Error&) {
      throw Error(Errc::empty_contamination, "solution has no contamination atoms");
    }
  }();
  const auto& w = atoms.weights();
  const std::size_t heavy = std::size_t(std::max_element(w.begin(), w.end()) - w.begin());
  const double th = atoms.support()[heavy];
  const DecisionRule rule = mallows_rule(s);
  const RiskEstimate e = pointwise_risk_estimate(rule, th, RiskMethod::monte_carlo(mc.draws, mc.seed));
  double gsup = -1.0, garg = th;
  for (double t : atoms.support()) {
    const double r = pointwise_risk(rule, t);
    if (r > gsup) {
      gsup = r;
      garg = t;
    }
  }
  return WorstRiskReport{std::nan(""), e.value, e.se, "mc_at_heaviest_atom", th, gsup, garg, mc.seed};
}

double brown_identity_gap(const DiscreteDistribution& G) {
  const MixtureDensity m(NoiseKernel::gaussian(), G);
  const DecisionRule rule = tweedie_rule(m);
  const double r = bayes_risk(rule, G);
  const double lo = G.support().front() - 12.0, hi = G.support().back() + 12.0;
  const Grid grid = make_uniform_grid(std::min(lo, -30.0), std::max(hi, 30.0), 2001);
  return std::abs(r - (1.0 - fisher_information_mixture(m, grid)));
}

}  // namespace robayes
