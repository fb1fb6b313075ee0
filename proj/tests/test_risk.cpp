#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "robayes/risk.hpp"
#include "robayes/simulate.hpp"

using namespace robayes;

namespace {

const DecisionRule kTanh{[](double x) { return std::tanh(x) - x; },
                         [](double x) { return -std::pow(std::tanh(x), 2); }, "tanh"};

}  // namespace

TEST_SUITE("risk") {

TEST_CASE("pointwise risk") {
  const DecisionRule mle = identity_rule();
  for (double th : {-7.0, 0.0, 0.3, 12.0}) {
    CHECK(std::abs(pointwise_risk(mle, th) - 1.0) < 1e-10);
    CHECK(std::abs(pointwise_risk(mle, th, RiskMethod::composite()) - 1.0) < 1e-10);
    const RiskEstimate mc = pointwise_risk_estimate(mle, th, RiskMethod::monte_carlo(200000, 4));
    CHECK(std::abs(mc.value - 1.0) < 3 * mc.se);
  }
  CHECK(std::abs(pointwise_risk(kTanh, 1.0) - 0.45) < 0.01);
  CHECK(pointwise_risk(constant_rule(0.0), 2.0) == doctest::Approx(4.0).epsilon(1e-12));

  // seeded Monte Carlo is reproducible
  const RiskMethod m = RiskMethod::monte_carlo(10000, 99);
  CHECK(pointwise_risk(kTanh, 0.4, m) == pointwise_risk(kTanh, 0.4, m));
}

TEST_CASE("quadrature agrees with Monte Carlo for every rule family") {
  std::vector<DecisionRule> rules{
      kTanh, huber_rule(solve_dirac(0.2)), huber_rule(solve_twopoint(2.0, 0.2)),
      tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), DiscreteDistribution::uniform_grid(-2, 2, 201)))};
  for (const auto& r : rules) {
    for (double th : {0.0, 1.3, -4.0}) {
      const RiskEstimate mc = pointwise_risk_estimate(r, th, RiskMethod::monte_carlo(1000000, 5));
      CHECK(std::abs(pointwise_risk(r, th) - mc.value) < 3 * mc.se);
    }
  }
}

TEST_CASE("Bayes risk") {
  CHECK(std::abs(bayes_risk(identity_rule(), DiscreteDistribution::two_point(3.0)) - 1.0) < 1e-10);
  const auto N1 = DiscreteDistribution::gaussian_grid(1.0);
  CHECK(std::abs(bayes_risk(tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), N1)), N1) - 0.5) < 2e-3);
  const auto T2 = DiscreteDistribution::two_point(2.0);
  const MixtureDensity m(NoiseKernel::gaussian(), T2);
  CHECK(std::abs(bayes_risk(tweedie_rule(m), T2) - (1 - fisher_information_mixture(m, default_f_grid()))) < 2e-3);
  // hand-weighted sum over the atoms
  const DecisionRule r = huber_rule(solve_dirac(0.3));
  CHECK(bayes_risk(r, T2) == doctest::Approx(0.5 * pointwise_risk(r, -2) + 0.5 * pointwise_risk(r, 2)).epsilon(1e-14));
}

TEST_CASE("Stein form of the risk") {
  for (double th : {-3.0, 0.0, 2.0}) CHECK(std::abs(stein_risk(identity_rule(), th) - 1.0) < 1e-12);
  for (double th : {-1.0, 0.0, 1.0}) CHECK(std::abs(stein_risk(kTanh, th) - pointwise_risk(kTanh, th)) < 1e-3);
  const DecisionRule hd = huber_rule(solve_dirac(0.2));
  CHECK(std::abs(stein_risk(hd, 0.0, RiskMethod::composite()) - pointwise_risk(hd, 0.0, RiskMethod::composite())) <
        5e-3);

  const MixtureDensity lc(NoiseKernel::gaussian(), DiscreteDistribution::gaussian_grid(1.0));
  std::vector<DecisionRule> rules{kTanh, hd, huber_rule(solve_logconcave(lc, 0.1)),
                                  tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), DiscreteDistribution::two_point(2)))};
  for (const auto& r : rules)
    for (int i = 0; i <= 20; ++i) {
      const double th = -5 + 0.5 * i;
      const RiskMethod m = RiskMethod::composite();
      CHECK(std::abs(stein_risk(r, th, m) - pointwise_risk(r, th, m)) < 5e-3);
    }

  const DecisionRule no_deriv{[](double x) { return -0.5 * x; }, {}, "half"};
  try {
    stein_risk(no_deriv, 0.0);
    FAIL("expected missing-derivative");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::missing_derivative);
  }
}

TEST_CASE("risk curves") {
  const Grid th = make_uniform_grid(-3, 3, 61);
  const RiskCurve c = risk_curve(kTanh, th);
  REQUIRE(c.values.size() == 61);
  double mx = 0.0, arg = 0.0;
  for (std::size_t i = 0; i < th.size(); ++i) {
    CHECK(c.values[i] >= 0.0);
    CHECK(c.values[i] == doctest::Approx(pointwise_risk(kTanh, th[i])).epsilon(1e-14));
    if (c.values[i] > mx) mx = c.values[i], arg = th[i];
  }
  CHECK(c.sup == mx);
  CHECK(c.arg_sup == arg);
  CHECK(c.method.find("quadrature") != std::string::npos);
}

TEST_CASE("Huber worst risk") {
  const WorstRiskReport tp = worst_risk_huber(solve_twopoint(2.0, 0.2));
  CHECK(std::abs(tp.bound - 1.67) < 0.05);
  CHECK(tp.estimate <= tp.bound * 1.02);

  const MixtureDensity g(NoiseKernel::gaussian(), DiscreteDistribution::gaussian_grid(1.0));
  const LogConcaveLF lc = solve_logconcave(g, 0.1);
  const WorstRiskReport wg = worst_risk_huber(lc);
  CHECK(wg.bound == doctest::Approx(1 + lc.k * lc.k).epsilon(1e-14));
  CHECK(wg.grid_sup <= wg.bound * 1.02);

  CHECK(worst_risk_huber(solve_dirac(0.01)).bound > worst_risk_huber(solve_dirac(0.2)).bound);
  for (double eps : {0.05, 0.2, 0.5}) {
    const WorstRiskReport r = worst_risk_huber(solve_dirac(eps));
    CHECK(r.grid_sup <= r.bound * 1.02);
    CHECK(r.estimator == "grid_sup");
  }
}

TEST_CASE("Mallows worst risk") {
  const MallowsSolution s = solve_mallows(assemble_problem(DiscreteDistribution::two_point(2.0), 0.2));
  const WorstRiskReport w = worst_risk_mallows(s, MonteCarloConfig{1000000, 20240601});
  CHECK(std::abs(w.estimate - 1.67) < 0.02);
  CHECK(w.estimator == "mc_at_heaviest_atom");
  CHECK(w.seed == 20240601);
  CHECK(std::isnan(w.bound));

  // heaviest atom against the lightest reported one
  const DiscreteDistribution H = extract_mass_points(s);
  std::size_t light = 0;
  for (std::size_t j = 0; j < H.size(); ++j)
    if (H.weights()[j] < H.weights()[light]) light = j;
  const RiskEstimate lw =
      pointwise_risk_estimate(mallows_rule(s), H.support()[light], RiskMethod::monte_carlo(1000000, 77));
  CHECK(w.estimate >= lw.value - 3 * std::hypot(w.se, lw.se));

  const MallowsSolution heavy = solve_mallows(assemble_problem(DiscreteDistribution::dirac(0.0), 0.95));
  CHECK(worst_risk_mallows(heavy, MonteCarloConfig{200000, 1}).estimate < 1.1);
}

TEST_CASE("Brown identity") {
  CHECK(brown_identity_gap(DiscreteDistribution::dirac(0.0)) < 1e-6);
  CHECK(brown_identity_gap(DiscreteDistribution::gaussian_grid(1.0)) < 2e-3);
  CHECK(brown_identity_gap(DiscreteDistribution::uniform_grid(-2, 2)) < 2e-3);
  CHECK(brown_identity_gap(DiscreteDistribution::two_point(2.0)) < 2e-3);
}

TEST_CASE("Bayes rule is optimal at its own prior") {
  for (const char* p : {"dirac:0", "gauss:1", "unif:-2,2", "twopoint:2"}) {
    const PriorSpec ps = PriorSpec::parse(p);
    const auto& G = ps.gridded();
    const double rb = bayes_risk(tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), G)), G);
    std::vector<DecisionRule> others{identity_rule(), linear_rule(G), huber_oracle_rule(ps, 0.2),
                                     mallows_oracle_rule(ps, 0.2)};
    for (const auto& r : others) {
      INFO(p << " " << r.label);
      CHECK(rb <= bayes_risk(r, G) + 2e-3);
    }
  }
}

}
