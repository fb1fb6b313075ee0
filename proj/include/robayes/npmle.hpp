#pragma once

#include <optional>
#include <span>
#include <vector>

#include "robayes/huber.hpp"
#include "robayes/mallows.hpp"
#include "robayes/mixtures.hpp"
#include "robayes/simplex.hpp"

namespace robayes {

enum class NpmleAlgorithm { active_set, em };

struct NPMLEConfig {
  std::optional<Grid> support_grid;  // default: grid_points on [min(data) - 1, max(data) + 1]
  std::size_t grid_points = 600;
  NoiseKernel kernel = NoiseKernel::gaussian();
  double tol = 1e-6;
  std::size_t max_iterations = 50000;
  NpmleAlgorithm algorithm = NpmleAlgorithm::active_set;
};

struct NPMLEFit {
  DiscreteDistribution mixing;
  double log_likelihood;
  std::size_t iterations;
  double kkt_gap;
  bool converged;
  Grid support_grid;
  std::vector<double> weights;  // on support_grid
  NoiseKernel kernel;
  std::vector<double> trace;    // log-likelihood per iteration
};

NPMLEFit fit_npmle(std::span<const double> data, const NPMLEConfig& cfg = {});

// sum_i log f(x_i)
double log_likelihood(std::span<const double> data, const MixtureDensity& m);
// max_j (1/n) sum_i kernel(x_i - theta_j) / f(x_i) - 1 over the given candidate grid.
double kkt_gap(std::span<const double> data, const MixtureDensity& m, const Grid& candidates);

DecisionRule empirical_bayes_rule(const NPMLEFit& fit, const NoiseKernel& kernel);
DecisionRule empirical_bayes_rule(const NPMLEFit& fit);

// Mallows restricted rule with the fitted prior as G0.
DecisionRule empirical_mallows_rule(const NPMLEFit& fit, double eps, const Grid& f_grid = default_f_grid(),
                                    const Grid& theta_grid = default_theta_grid(), const SolverConfig& cfg = {});
// Huber restricted rule from the fitted gaussian marginal.
DecisionRule empirical_huber_rule(const NPMLEFit& fit, double eps, const SolverConfig& cfg = {},
                                  const Grid& grid = default_huber_grid());

// phi * P^M for the Dirac-prior Mallows problem at contamination eps, tabulated on [-40, 40].
NoiseKernel mallows_noise_kernel(double eps, const SolverConfig& cfg = {});
NPMLEFit mallows_noise_fit(std::span<const double> data, double eps, NPMLEConfig cfg = {},
                           const SolverConfig& solver = {});

}  // namespace robayes
