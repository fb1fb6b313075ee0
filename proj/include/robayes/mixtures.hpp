#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "robayes/numerics.hpp"

namespace robayes {

// Finite mixing distribution: sorted distinct support, weights on the simplex.
class DiscreteDistribution {
 public:
  // Validates: equal lengths, sorted distinct support, weights >= 0 summing to 1 within 1e-10.
  DiscreteDistribution(std::vector<double> support, std::vector<double> weights);

  // Sorts, merges duplicate locations, drops zero weights and renormalises.
  static DiscreteDistribution normalized(std::vector<double> support, std::vector<double> weights);
  static DiscreteDistribution dirac(double c);
  // Half mass at -a and +a.
  static DiscreteDistribution two_point(double a);
  // N(mean, variance) on `n` equally spaced points covering mean +- span_sd standard deviations.
  static DiscreteDistribution gaussian_grid(double variance, double mean = 0.0, std::size_t n = 2001,
                                            double span_sd = 8.0);
  // Equal weights on `n` equally spaced points of [lo, hi].
  static DiscreteDistribution uniform_grid(double lo, double hi, std::size_t n = 2001);
  // (1 - eps) * base + eps * other.
  static DiscreteDistribution contaminate(const DiscreteDistribution& base, double eps,
                                          const DiscreteDistribution& other);

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return support_.size(); }
  double mean() const;
  double variance() const;
  DiscreteDistribution pruned(double min_weight) const;

 private:
  DiscreteDistribution() = default;
  std::vector<double> support_;
  std::vector<double> weights_;
};

// Location noise density with score. Immutable and cheap to copy.
class NoiseKernel {
 public:
  enum class Kind { gaussian, laplace, huber, contaminated_normal, tabulated };

  static NoiseKernel gaussian();
  static NoiseKernel laplace(double scale);
  static NoiseKernel huber(double k, double eps);
  // (1 - p) phi(u) + p phi(u / s) / s
  static NoiseKernel contaminated_normal(double p, double s);
  // Tabulated log density with score on a uniform grid; cubic Hermite in between,
  // constant score beyond the ends. Density values are floored at the density floor.
  static NoiseKernel tabulated(const Grid& grid, std::span<const double> density,
                               std::span<const double> score, std::string label = "tabulated");

  Kind kind() const { return kind_; }
  double k() const { return a_; }
  double eps() const { return b_; }
  double scale() const { return a_; }
  const std::string& label() const { return label_; }

  double log_density(double u) const;
  double density(double u) const { return std::exp(log_density(u)); }
  // d/du log density; left derivative at kinks.
  double score(double u) const;
  // a.e. derivative of the score.
  double score_derivative(double u) const;

  struct Table;

 private:
  NoiseKernel() = default;
  Kind kind_ = Kind::gaussian;
  double a_ = 0.0, b_ = 0.0;
  double log_c0_ = 0.0, log_c1_ = 0.0;
  std::string label_ = "gaussian";
  std::shared_ptr<const Table> table_;
};

// Solves the Huber link 2 phi(k)/k - 2 Phi(-k) = eps / (1 - eps) for k.
double huber_k(double eps);
NoiseKernel huber_noise_kernel(double eps);
NoiseKernel laplace_noise_kernel(double scale);

// Posterior summaries at a point x, with r_j proportional to w_j kernel(x - theta_j).
struct PosteriorSummary {
  double log_density;
  double score;             // f'(x) / f(x)
  double score_derivative;  // (log f)''(x)
  double mean;              // E[theta | x]
  double mean_derivative;   // d/dx E[theta | x]
};

class MixtureDensity {
 public:
  MixtureDensity(NoiseKernel kernel, DiscreteDistribution mixing);

  const NoiseKernel& kernel() const { return kernel_; }
  const DiscreteDistribution& mixing() const { return mixing_; }

  double density(double x) const;
  double log_density(double x) const;
  double score(double x) const;
  double score_derivative(double x) const;
  double posterior_mean(double x) const;
  PosteriorSummary summarize(double x) const;

  std::vector<double> tabulate(const Grid& grid) const;

 private:
  NoiseKernel kernel_;
  DiscreteDistribution mixing_;
  std::vector<double> theta_, logw_;
};

// delta(x) = x + score(x).
struct DecisionRule {
  std::function<double(double)> score;
  std::function<double(double)> score_derivative;  // may be empty
  std::string label;
  // Points where the score derivative jumps; quadrature splits its panels there.
  std::vector<double> kinks = {};

  double operator()(double x) const { return x + score(x); }
  bool has_derivative() const { return static_cast<bool>(score_derivative); }
};

DecisionRule identity_rule();
DecisionRule constant_rule(double c);
// Posterior mean rule E[theta | x]; equals x + f'/f for the gaussian kernel.
DecisionRule tweedie_rule(const MixtureDensity& m, std::string label = "bayes");
DecisionRule tweedie_rule(std::shared_ptr<const MixtureDensity> m, std::string label = "bayes");
// Score tabulated on a grid, linear in between, constant beyond the ends.
DecisionRule tabulated_rule(const Grid& grid, std::vector<double> score, std::string label);

double fisher_information_grid(std::span<const double> values, const Grid& grid,
                               double density_floor = kDensityFloor);
double fisher_information_mixture(const MixtureDensity& m, const Grid& grid);

struct RuleTableRow {
  double x, f, score, delta;
};
std::vector<RuleTableRow> rule_table(const DecisionRule& rule, const Grid& grid,
                                     std::span<const double> density = {});

}  // namespace robayes
