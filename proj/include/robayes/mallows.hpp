#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "robayes/mixtures.hpp"
#include "robayes/simplex.hpp"

namespace robayes {

// min I(phi * G) over G = (1 - eps) G0 + eps H on a grid of candidate atoms for H.
struct MallowsProblem {
  DiscreteDistribution base_prior;
  double eps;
  Grid f_grid;
  Grid theta_grid;
  std::vector<double> base_marginal;                // (1 - eps) f0 on f_grid is the offset
  std::shared_ptr<const Eigen::MatrixXd> kernel;    // K(i, j) = phi(x_i - theta_j)
};

MallowsProblem assemble_problem(const DiscreteDistribution& base_prior, double eps,
                                const Grid& f_grid = default_f_grid(),
                                const Grid& theta_grid = default_theta_grid());

struct MallowsStats : SolverStats {
  // max over the theta grid of R(delta^M, theta), and t = that value - 1.
  double worst_risk = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
};

struct MallowsSolution {
  DiscreteDistribution base_prior;
  double eps;
  Grid f_grid;
  Grid theta_grid;
  std::vector<double> weights;   // h on theta_grid, clamped at 0
  DiscreteDistribution contamination;
  DiscreteDistribution least_favorable_prior;
  std::vector<double> f_values;
  double objective;
  MallowsStats stats;
};

struct MallowsOptions {
  // Evaluate the worst pointwise risk over the theta grid after solving.
  bool compute_worst_risk = true;
};

MallowsSolution solve_mallows(const MallowsProblem& p, const SolverConfig& cfg = {},
                              const MallowsOptions& opts = {});

double discrete_objective(const MallowsProblem& p, std::span<const double> h);
std::vector<double> objective_gradient(const MallowsProblem& p, std::span<const double> h);
std::vector<double> mallows_f_values(const MallowsProblem& p, std::span<const double> h);
double optimality_certificate(const MallowsProblem& p, std::span<const double> h);

// Clusters grid atoms above atom_tol (relative to total mass) into single atoms: contiguous
// runs first, then runs whose centres lie within merge_width of each other.
DiscreteDistribution extract_mass_points(const MallowsSolution& s, double atom_tol = 1e-6, double merge_width = 0.25);
DiscreteDistribution extract_mass_points(const Grid& theta_grid, std::span<const double> weights,
                                         double atom_tol = 1e-6, double merge_width = 0.25);

DecisionRule mallows_rule(const MallowsSolution& s);

// Worst pointwise risk of the Mallows rule over the theta grid.
double mallows_worst_risk(const MallowsSolution& s);

}  // namespace robayes
