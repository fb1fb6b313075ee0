#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "robayes/huber.hpp"
#include "robayes/mixtures.hpp"
#include "robayes/npmle.hpp"
#include "robayes/simplex.hpp"

namespace robayes {

// Independent engine for (master seed, index, purpose).
std::mt19937_64 make_rng(std::uint64_t master_seed, std::uint64_t index, std::uint64_t purpose);

// Named or explicit prior. Grammar: dirac:c, gauss:A, unif:lo,hi (or unif:B for [-B, B]), twopoint:a, unif03.
class PriorSpec {
 public:
  enum class Kind { discrete, gauss, unif, twopoint };

  static PriorSpec parse(std::string_view text);
  static PriorSpec from_distribution(DiscreteDistribution d, std::string name = "discrete");

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool continuous() const { return kind_ == Kind::gauss || kind_ == Kind::unif; }
  double param_a() const { return a_; }
  double param_b() const { return b_; }
  // Exact for atomic priors; continuous priors on 2001 points (+-8 sd for gauss).
  const DiscreteDistribution& gridded() const { return *grid_; }
  double draw(std::mt19937_64& rng) const;

 private:
  PriorSpec() = default;
  Kind kind_ = Kind::discrete;
  double a_ = 0.0, b_ = 0.0;
  std::string name_;
  std::optional<DiscreteDistribution> grid_;
};

struct NoiseSpec {
  enum class Kind { gauss, laplace, tukey };
  Kind kind = Kind::gauss;
  double laplace_scale = 0.70710678118654752440;  // unit variance

  static NoiseSpec parse(std::string_view text);
  std::string name() const;
  NoiseKernel kernel() const;
  double draw(std::mt19937_64& rng) const;
};

struct DGP {
  PriorSpec prior;
  NoiseSpec noise;
  std::size_t n;
};

struct Sample {
  std::vector<double> theta, x;
};

Sample draw_sample(const DGP& dgp, std::uint64_t seed, std::uint64_t index = 0);

DecisionRule linear_rule(const DiscreteDistribution& G);
// Posterior mean under the true prior and noise density.
DecisionRule oracle_rule(const DGP& dgp);
// Huber least-favorable solution for a prior: Dirac at 0, two-point with a > 1 and log-concave
// marginals use closed forms, anything else (or force_general) the grid solver.
struct HuberFit {
  std::optional<HuberSolution> closed;
  std::optional<GeneralHuberSolution> general;
  DecisionRule rule;
  std::string form;  // dirac | logconcave | twopoint | general
};
HuberFit fit_huber(const PriorSpec& prior, double eps, const SolverConfig& cfg = {}, bool force_general = false);
// Huber restricted Bayes rule for the prior (closed form when available).
DecisionRule huber_oracle_rule(const PriorSpec& prior, double eps, const SolverConfig& cfg = {});
DecisionRule mallows_oracle_rule(const PriorSpec& prior, double eps, const SolverConfig& cfg = {});

// Rule names: mle, linear, bayes, oracle, glmix, llmix, hlmix, mlmix, huber, mallows,
// eb_huber, eb_mallows. The last six take eps.
struct RuleSpec {
  std::string name;
  double eps = 0.0;
  bool has_eps() const;
  std::string label() const;
};
RuleSpec parse_rule(std::string_view text);  // "mlmix:0.1", "mle"

struct ExperimentSpec {
  DGP dgp;
  std::vector<RuleSpec> rules;
  std::size_t replications = 100;
  std::uint64_t master_seed = 1;
  std::size_t npmle_grid_points = 600;
};

struct ResultRow {
  std::string rule;
  double eps;
  double mean_mse;
  double se;
  std::size_t n;
  std::size_t replications;  // successful
  std::size_t failures;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::vector<double>> per_replication;  // [rule][replication], NaN on failure
  double wall_seconds = 0.0;
};

ResultTable run_experiment(const ExperimentSpec& spec);

// Mean and standard error of finite entries, summed pairwise in index order.
struct MeanSE {
  double mean, se;
  std::size_t count;
};
MeanSE mean_se(const std::vector<double>& v);

struct ExcessRiskPoint {
  std::size_t n;
  double mean_excess;
  double se;
  std::size_t replications;
  std::vector<double> excess;  // per replication
};

struct ExcessRiskCurve {
  double oracle_risk;  // r(G0, delta^M)
  std::vector<ExcessRiskPoint> points;
};

ExcessRiskCurve excess_risk_curve(const PriorSpec& prior, double eps, const std::vector<std::size_t>& n_list,
                                  std::size_t reps, std::uint64_t master_seed, const SolverConfig& cfg = {});

}  // namespace robayes
