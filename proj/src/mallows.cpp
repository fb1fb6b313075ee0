#include "robayes/mallows.hpp"

#include <algorithm>
#include <cmath>

#include "robayes/parallel.hpp"
#include "robayes/risk.hpp"

namespace robayes {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SimplexProblem make_simplex_problem(const MallowsProblem& p) {
  const double dx = p.f_grid.require_spacing();
  VectorXd offset(Index(p.f_grid.size()));
  for (std::size_t i = 0; i < p.f_grid.size(); ++i) offset[Index(i)] = (1.0 - p.eps) * p.base_marginal[i];
  return SimplexProblem(std::make_shared<FisherFunctional>(dx), std::move(offset), p.kernel, p.eps);
}

VectorXd to_vector(std::span<const double> h, Index L) {
  if (Index(h.size()) != L) throw Error(Errc::length_mismatch, "weights differ in length from the theta grid");
  return Eigen::Map<const VectorXd>(h.data(), L);
}

}  // namespace

MallowsProblem assemble_problem(const DiscreteDistribution& base_prior, double eps, const Grid& f_grid,
                                const Grid& theta_grid) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::invalid_epsilon, "eps must lie in (0, 1)");
  f_grid.require_spacing();
  if (f_grid.front() > theta_grid.front() - 6.0 + 1e-9 || f_grid.back() < theta_grid.back() + 6.0 - 1e-9)
    throw Error(Errc::grid_coverage, "f grid must cover the theta grid widened by 6 on each side");
  const MixtureDensity f0(NoiseKernel::gaussian(), base_prior);
  const Index M = Index(f_grid.size()), L = Index(theta_grid.size());
  auto K = std::make_shared<MatrixXd>(M, L);
  parallel_for(std::size_t(L), [&](std::size_t j) {
    for (Index i = 0; i < M; ++i) (*K)(i, Index(j)) = normal_pdf(f_grid[std::size_t(i)] - theta_grid[j]);
  });
  return MallowsProblem{base_prior, eps, f_grid, theta_grid, f0.tabulate(f_grid), std::move(K)};
}

std::vector<double> mallows_f_values(const MallowsProblem& p, std::span<const double> h) {
  const SimplexProblem sp = make_simplex_problem(p);
  const VectorXd y = sp.image(to_vector(h, sp.dim()));
  return std::vector<double>(y.data(), y.data() + y.size());
}

double discrete_objective(const MallowsProblem& p, std::span<const double> h) {
  const SimplexProblem sp = make_simplex_problem(p);
  return sp.value(to_vector(h, sp.dim()));
}

std::vector<double> objective_gradient(const MallowsProblem& p, std::span<const double> h) {
  const SimplexProblem sp = make_simplex_problem(p);
  const VectorXd g = sp.gradient(to_vector(h, sp.dim()));
  return std::vector<double>(g.data(), g.data() + g.size());
}

double optimality_certificate(const MallowsProblem& p, std::span<const double> h) {
  const SimplexProblem sp = make_simplex_problem(p);
  return sp.frank_wolfe_gap(to_vector(h, sp.dim()));
}

MallowsSolution solve_mallows(const MallowsProblem& p, const SolverConfig& cfg, const MallowsOptions& opts) {
  const SimplexProblem sp = make_simplex_problem(p);
  SolverConfig c = cfg;
  c.tol = std::max(cfg.tol, 1e-7);
  SimplexResult r = minimize_on_simplex(sp, c);
  std::vector<double> h(r.h.data(), r.h.data() + r.h.size());
  for (double& x : h) x = std::max(x, 0.0);
  std::vector<double> s, w;
  for (std::size_t j = 0; j < h.size(); ++j)
    if (h[j] > 0.0) {
      s.push_back(p.theta_grid[j]);
      w.push_back(h[j]);
    }
  DiscreteDistribution H = DiscreteDistribution::normalized(std::move(s), std::move(w));
  DiscreteDistribution G = DiscreteDistribution::contaminate(p.base_prior, p.eps, H);
  const VectorXd y = sp.image(r.h);
  MallowsStats stats;
  static_cast<SolverStats&>(stats) = std::move(r.stats);
  MallowsSolution sol{p.base_prior, p.eps,    p.f_grid, p.theta_grid, std::move(h), std::move(H), std::move(G),
                      std::vector<double>(y.data(), y.data() + y.size()), r.objective, std::move(stats)};
  if (opts.compute_worst_risk) {
    sol.stats.worst_risk = mallows_worst_risk(sol);
    sol.stats.t = sol.stats.worst_risk - 1.0;
  }
  return sol;
}

DiscreteDistribution extract_mass_points(const Grid& theta_grid, std::span<const double> weights, double atom_tol,
                                         double merge_width) {
  if (weights.size() != theta_grid.size()) throw Error(Errc::length_mismatch, "weights differ in length from the grid");
  double total = 0.0;
  for (double w : weights) total += std::max(w, 0.0);
  // Contiguous runs of retained grid points.
  std::vector<double> loc, mass;
  double acc_w = 0.0, acc_x = 0.0;
  for (std::size_t j = 0; j <= weights.size(); ++j) {
    const bool on = j < weights.size() && weights[j] > atom_tol * total;
    if (on) {
      acc_w += weights[j];
      acc_x += weights[j] * theta_grid[j];
    } else if (acc_w > 0.0) {
      loc.push_back(acc_x / acc_w);
      mass.push_back(acc_w);
      acc_w = acc_x = 0.0;
    }
  }
  if (loc.empty()) throw Error(Errc::empty_support, "no atom exceeds the weight threshold");
  // One continuous atom often discretises into nearby runs with zeros between them.
  std::vector<double> mloc{loc[0]}, mmass{mass[0]};
  for (std::size_t k = 1; k < loc.size(); ++k) {
    if (loc[k] - mloc.back() < merge_width) {
      const double w = mmass.back() + mass[k];
      mloc.back() = (mloc.back() * mmass.back() + loc[k] * mass[k]) / w;
      mmass.back() = w;
    } else {
      mloc.push_back(loc[k]);
      mmass.push_back(mass[k]);
    }
  }
  return DiscreteDistribution::normalized(std::move(mloc), std::move(mmass));
}

DiscreteDistribution extract_mass_points(const MallowsSolution& s, double atom_tol, double merge_width) {
  return extract_mass_points(s.theta_grid, s.weights, atom_tol, merge_width);
}

DecisionRule mallows_rule(const MallowsSolution& s) {
  return tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), s.least_favorable_prior), "mallows");
}

double mallows_worst_risk(const MallowsSolution& s) {
  const RiskCurve c = risk_curve(mallows_rule(s), s.theta_grid);
  return c.sup;
}

}  // namespace robayes
