#pragma once

#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "robayes/mixtures.hpp"
#include "robayes/simplex.hpp"

namespace robayes {

// Dirac prior: Huber's least favourable density, hard-thresholding rule.
struct DiracLF {
  double k;
  double eps;
};

// Log-concave marginal f0: f* = (1 - eps) f0 on [-b_minus, b_plus] with exponential tails of rate k.
struct LogConcaveLF {
  double b_plus, b_minus;
  double k;
  double eps;
  std::shared_ptr<const MixtureDensity> f0;
  double b() const { return std::max(b_plus, b_minus); }
};

// f0 = (phi(x - a) + phi(x + a)) / 2: amp^2 cosh^2(kx/2) on [-c, c], (1 - eps) f0 on
// c <= |x| <= b, exponential tails beyond b. tail_only marks the small-eps regime where
// the centre is not modified (c = amp = 0).
struct TwoPointLF {
  double a;
  double b, c, k, amp;
  double eps;
  bool tail_only = false;
};

using HuberSolution = std::variant<DiracLF, LogConcaveLF, TwoPointLF>;

DiracLF solve_dirac(double eps);
LogConcaveLF solve_logconcave(const MixtureDensity& f0, double eps);
TwoPointLF solve_twopoint(double a, double eps);

double huber_k(const HuberSolution& s);
// Outer breakpoint: k for the Dirac case.
double huber_b(const HuberSolution& s);
double huber_eps(const HuberSolution& s);

// Residuals of the defining identities.
struct TwoPointResiduals {
  double id1, id2, id3, id4;
};
TwoPointResiduals twopoint_residuals(const TwoPointLF& s);
struct LogConcaveResiduals {
  double slope_plus, slope_minus, mass;
};
LogConcaveResiduals logconcave_residuals(const LogConcaveLF& s);

// Marginal density f0 of the initial prior for a closed-form solution.
double huber_base_density(const HuberSolution& s, double x);
double huber_density_at(const HuberSolution& s, double x);
std::vector<double> huber_density(const HuberSolution& s, const Grid& grid);
double huber_score_at(const HuberSolution& s, double x);
DecisionRule huber_rule(const HuberSolution& s);

// Grid used for the general solver by default: [-30, 30] with 3001 points.
Grid default_huber_grid();

struct GeneralHuberSolution {
  Grid grid;
  std::vector<double> f;
  std::vector<double> lower;   // (1 - eps) f0
  double eps;
  double objective;
  SolverStats stats;
  double kkt_active_min;       // min over the active set of the multiplier
  double kkt_free_residual;    // sup over the free set of the Euler-Lagrange residual
  double asymmetry;            // max |f(x) - f(-x)| / max f, NaN if the grid is not symmetric
  double max_abs_score;
};

// min discrete I(f) subject to f >= (1 - eps) f0 and sum f dx = 1.
GeneralHuberSolution solve_general(std::span<const double> f0, const Grid& grid, double eps,
                                   const SolverConfig& cfg = {});

// Score at cell midpoints, (f_{i+1} - f_i) / (dx (f_{i+1} + f_i) / 2), as a tabulated rule.
DecisionRule general_huber_rule(const GeneralHuberSolution& s, std::string label = "huber");

}  // namespace robayes
