#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robayes/huber.hpp"
#include "robayes/mallows.hpp"
#include "robayes/mixtures.hpp"

namespace robayes {

struct RiskMethod {
  enum class Kind { gauss_hermite, composite, monte_carlo };
  Kind kind = Kind::gauss_hermite;
  std::size_t order = 64;        // Gauss-Hermite order
  std::size_t draws = 1000000;   // Monte Carlo draws
  std::uint64_t seed = 0;

  static RiskMethod quadrature(std::size_t order = 64) { return {Kind::gauss_hermite, order, 0, 0}; }
  // Composite Gauss-Legendre against the normal density; accurate for kinked rules.
  static RiskMethod composite() { return {Kind::composite, 0, 0, 0}; }
  static RiskMethod monte_carlo(std::size_t draws, std::uint64_t seed) { return {Kind::monte_carlo, 0, draws, seed}; }
  std::string describe() const;
};

struct RiskEstimate {
  double value;
  double se;  // 0 for quadrature
};

RiskEstimate pointwise_risk_estimate(const DecisionRule& rule, double theta, const RiskMethod& method = {});
double pointwise_risk(const DecisionRule& rule, double theta, const RiskMethod& method = {});
double bayes_risk(const DecisionRule& rule, const DiscreteDistribution& G, const RiskMethod& method = {});
// 1 + E_theta[g^2 + 2 g'] with g the rule's score.
double stein_risk(const DecisionRule& rule, double theta, const RiskMethod& method = {});

struct RiskCurve {
  Grid theta_grid;
  std::vector<double> values;
  std::vector<double> se;
  std::string method;
  double sup;
  double arg_sup;
};

RiskCurve risk_curve(const DecisionRule& rule, const Grid& theta_grid, const RiskMethod& method = {});

struct WorstRiskReport {
  double bound;        // 1 + k^2 when a bound applies, NaN otherwise
  double estimate;
  double se;           // Monte Carlo standard error, 0 for grid estimates
  std::string estimator;
  double location;     // theta at which the estimate was taken
  double grid_sup;     // sup over a theta grid (for Mallows: over the extracted atoms)
  double grid_arg_sup;
  std::uint64_t seed;
};

WorstRiskReport worst_risk_huber(const HuberSolution& sol);

struct MonteCarloConfig {
  std::size_t draws = 1000000;
  std::uint64_t seed = 20240601;
};
WorstRiskReport worst_risk_mallows(const MallowsSolution& s, const MonteCarloConfig& mc = {},
                                   double atom_tol = 1e-6);

double brown_identity_gap(const DiscreteDistribution& G);

}  // namespace robayes
