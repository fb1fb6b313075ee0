#include "robayes/npmle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace robayes {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_data(std::span<const double> data) {
  if (data.size() < 2) throw Error(Errc::invalid_argument, "NPMLE needs at least two observations");
  for (double x : data)
    if (!std::isfinite(x)) throw Error(Errc::invalid_argument, "observations must be finite");
}

// Row-scaled likelihood matrix: A(i, j) = kernel(x_i - theta_j) / c_i, c_i = max_j kernel(x_i - theta_j).
void likelihood_matrix(std::span<const double> data, const Grid& grid, const NoiseKernel& kernel, MatrixXd& A,
                       VectorXd& log_c) {
  const Index n = Index(data.size()), L = Index(grid.size());
  A.resize(n, L);
  log_c.resize(n);
  for (Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < L; ++j) {
      const double l = kernel.log_density(data[std::size_t(i)] - grid[std::size_t(j)]);
      A(i, j) = l;
      mx = std::max(mx, l);
    }
    if (!std::isfinite(mx)) throw Error(Errc::invalid_argument, "observation has zero likelihood on the support grid");
    log_c[i] = mx;
    for (Index j = 0; j < L; ++j) A(i, j) = std::exp(A(i, j) - mx);
  }
}

NPMLEFit finish(const Grid& grid, const VectorXd& h, double loglik, std::size_t iters, double gap, bool converged,
                const NoiseKernel& kernel, std::vector<double> trace) {
  std::vector<double> s, w;
  for (Index j = 0; j < h.size(); ++j)
    if (h[j] > 0.0) {
      s.push_back(grid[std::size_t(j)]);
      w.push_back(h[j]);
    }
  return NPMLEFit{DiscreteDistribution::normalized(std::move(s), std::move(w)),
                  loglik,
                  iters,
                  gap,
                  converged,
                  grid,
                  std::vector<double>(h.data(), h.data() + h.size()),
                  kernel,
                  std::move(trace)};
}

}  // namespace

NPMLEFit fit_npmle(std::span<const double> data, const NPMLEConfig& cfg) {
  check_data(data);
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  const Grid grid = cfg.support_grid ? *cfg.support_grid : make_uniform_grid(*mn - 1.0, *mx + 1.0, cfg.grid_points);
  auto A = std::make_shared<MatrixXd>();
  VectorXd log_c;
  likelihood_matrix(data, grid, cfg.kernel, *A, log_c);
  const double n = double(data.size());
  const double sum_log_c = log_c.sum();
  const Index L = A->cols();

  if (cfg.algorithm == NpmleAlgorithm::em) {
    VectorXd h = VectorXd::Constant(L, 1.0 / double(L));
    VectorXd y = (*A) * h;
    std::vector<double> trace;
    double gap = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    bool converged = false;
    for (; it < cfg.max_iterations; ++it) {
      const VectorXd r = y.cwiseInverse();
      const VectorXd grad = (A->transpose() * r) / n;  // (1/n) sum_i A_ij / f_i
      trace.push_back(y.array().log().sum() + sum_log_c);
      gap = grad.maxCoeff() - 1.0;
      if (gap <= cfg.tol) {
        converged = true;
        break;
      }
      h = h.cwiseProduct(grad);
      h /= h.sum();
      y = (*A) * h;
    }
    const double ll = y.array().log().sum() + sum_log_c;
    return finish(grid, h, ll, it, gap, converged, cfg.kernel, std::move(trace));
  }

  const SimplexProblem P(std::make_shared<NegLogLikFunctional>(), VectorXd::Zero(A->rows()), A, 1.0);
  // Start from a coarse uniform subset of the grid.
  VectorXd h0 = VectorXd::Zero(L);
  const Index stride = std::max<Index>(1, L / 50);
  for (Index j = 0; j < L; j += stride) h0[j] = 1.0;
  SolverConfig sc;
  sc.tol = cfg.tol;
  sc.max_iterations = cfg.max_iterations;
  SimplexResult r = minimize_on_simplex(P, sc, &h0);
  std::vector<double> trace;
  trace.reserve(r.stats.trace.size());
  for (double F : r.stats.trace) trace.push_back(-n * F + sum_log_c);
  const double ll = -n * r.objective + sum_log_c;
  return finish(grid, r.h, ll, r.stats.iterations, r.stats.gap, r.stats.converged, cfg.kernel, std::move(trace));
}

double log_likelihood(std::span<const double> data, const MixtureDensity& m) {
  double acc = 0.0;
  for (double x : data) acc += m.log_density(x);
  return acc;
}

double kkt_gap(std::span<const double> data, const MixtureDensity& m, const Grid& candidates) {
  const double n = double(data.size());
  std::vector<double> logf(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) logf[i] = m.log_density(data[i]);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
      acc += std::exp(m.kernel().log_density(data[i] - candidates[j]) - logf[i]);
    best = std::max(best, acc / n);
  }
  return best - 1.0;
}

DecisionRule empirical_bayes_rule(const NPMLEFit& fit, const NoiseKernel& kernel) {
  return tweedie_rule(MixtureDensity(kernel, fit.mixing), "eb");
}

DecisionRule empirical_bayes_rule(const NPMLEFit& fit) { return empirical_bayes_rule(fit, fit.kernel); }

DecisionRule empirical_mallows_rule(const NPMLEFit& fit, double eps, const Grid& f_grid, const Grid& theta_grid,
                                    const SolverConfig& cfg) {
  const MallowsProblem p = assemble_problem(fit.mixing, eps, f_grid, theta_grid);
  MallowsOptions opts;
  opts.compute_worst_risk = false;
  const MallowsSolution s = solve_mallows(p, cfg, opts);
  DecisionRule r = mallows_rule(s);
  r.label = "eb_mallows";
  return r;
}

DecisionRule empirical_huber_rule(const NPMLEFit& fit, double eps, const SolverConfig& cfg, const Grid& grid) {
  const MixtureDensity m(NoiseKernel::gaussian(), fit.mixing);
  const std::vector<double> f0 = m.tabulate(grid);
  const GeneralHuberSolution s = solve_general(f0, grid, eps, cfg);
  return general_huber_rule(s, "eb_huber");
}

NoiseKernel mallows_noise_kernel(double eps, const SolverConfig& cfg) {
  const MallowsProblem p = assemble_problem(DiscreteDistribution::dirac(0.0), eps);
  MallowsOptions opts;
  opts.compute_worst_risk = false;
  const MallowsSolution s = solve_mallows(p, cfg, opts);
  const MixtureDensity m(NoiseKernel::gaussian(), s.least_favorable_prior);
  const Grid g = make_uniform_grid(-40.0, 40.0, 8001);
  std::vector<double> dens(g.size()), score(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const PosteriorSummary ps = m.summarize(g[i]);
    dens[i] = std::exp(ps.log_density);
    score[i] = ps.score;
  }
  return NoiseKernel::tabulated(g, dens, score, "mallows");
}

NPMLEFit mallows_noise_fit(std::span<const double> data, double eps, NPMLEConfig cfg, const SolverConfig& solver) {
  cfg.kernel = mallows_noise_kernel(eps, solver);
  return fit_npmle(data, cfg);
}

}  // namespace robayes
