#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "robayes/parallel.hpp"
#include "robayes/risk.hpp"
#include "robayes/simulate.hpp"

using namespace robayes;
using testing_util::sup_dev;

namespace {

struct Moments {
  double mean, var, kurt, se_var;
};

Moments moments(const std::vector<double>& v) {
  const double n = double(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  return {m, m2, m4 / (m2 * m2) - 3.0, std::sqrt((m4 - m2 * m2) / n)};
}

ExperimentSpec spec(const char* prior, const char* noise, std::size_t n, std::vector<const char*> rules,
                    std::size_t reps, std::uint64_t seed = 11) {
  ExperimentSpec s{DGP{PriorSpec::parse(prior), NoiseSpec::parse(noise), n}, {}, reps, seed, 600};
  for (const char* r : rules) s.rules.push_back(parse_rule(r));
  return s;
}

const ResultRow& row(const ResultTable& t, const std::string& label) {
  for (const auto& r : t.rows)
    if (r.rule == label) return r;
  FAIL("missing row " << label);
  return t.rows.front();
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("prior and noise grammar") {
  CHECK(PriorSpec::parse("dirac:1.5").gridded().support()[0] == 1.5);
  CHECK(PriorSpec::parse("dirac").gridded().support()[0] == 0.0);
  CHECK(PriorSpec::parse("twopoint:2").gridded().size() == 2);
  CHECK(PriorSpec::parse("gauss:2").continuous());
  CHECK(PriorSpec::parse("unif:-1,4").param_b() == 4.0);
  CHECK(PriorSpec::parse("unif:2").param_a() == -2.0);
  CHECK(PriorSpec::parse("unif03").param_b() == 3.0);
  for (const char* bad : {"gauss:-1", "unif:3,1", "cauchy", "twopoint:x", "dirac:1,2"}) {
    INFO(bad);
    CHECK_THROWS_AS(PriorSpec::parse(bad), Error);
  }
  CHECK(NoiseSpec::parse("tukey").kind == NoiseSpec::Kind::tukey);
  CHECK(NoiseSpec::parse("laplace").laplace_scale == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(NoiseSpec::parse("cauchy"), Error);
  CHECK(parse_rule("mlmix:0.1").label() == "mlmix(0.1)");
  CHECK(parse_rule("mle").label() == "mle");
  CHECK_THROWS_AS(parse_rule("mlmix"), Error);
  CHECK_THROWS_AS(parse_rule("mlmix:1.5"), Error);
  CHECK_THROWS_AS(parse_rule("mle:0.1"), Error);
  CHECK_THROWS_AS(parse_rule("best"), Error);
}

TEST_CASE("draws") {
  const Sample s = draw_sample(DGP{PriorSpec::parse("dirac:0"), NoiseSpec{}, 1000000}, 3);
  const Moments m = moments(s.x);
  CHECK(std::abs(m.mean) < 3 / std::sqrt(1e6));

  const Sample t = draw_sample(DGP{PriorSpec::parse("dirac:0"), NoiseSpec::parse("tukey"), 1000000}, 4);
  const Moments mt = moments(t.x);
  CHECK(mt.kurt > 0);
  CHECK(std::abs(mt.var - 2.6) < 3 * mt.se_var);

  const Sample a = draw_sample(DGP{PriorSpec::parse("unif03"), NoiseSpec::parse("laplace"), 1000}, 5, 2);
  const Sample b = draw_sample(DGP{PriorSpec::parse("unif03"), NoiseSpec::parse("laplace"), 1000}, 5, 2);
  const Sample c = draw_sample(DGP{PriorSpec::parse("unif03"), NoiseSpec::parse("laplace"), 1000}, 5, 3);
  CHECK(a.x == b.x);
  CHECK(a.theta == b.theta);
  CHECK(a.x != c.x);
  for (double th : a.theta) {
    CHECK(th >= 0.0);
    CHECK(th <= 3.0);
  }
}

TEST_CASE("linear rule") {
  CHECK(sup_dev(linear_rule(DiscreteDistribution::dirac(0.0)), [](double) { return 0.0; }, -5, 5) < 1e-15);
  CHECK(sup_dev(linear_rule(DiscreteDistribution::gaussian_grid(1.0)), [](double x) { return x / 2; }, -5, 5) < 1e-3 * 5);
  CHECK(sup_dev(linear_rule(DiscreteDistribution::two_point(2.0)), [](double x) { return 0.8 * x; }, -5, 5) < 1e-12);
}

TEST_CASE("oracle rule") {
  const DGP g{PriorSpec::parse("twopoint:2"), NoiseSpec{}, 10};
  CHECK(sup_dev(oracle_rule(g), tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), DiscreteDistribution::two_point(2))),
                -10, 10) < 1e-10);
  const DGP d{PriorSpec::parse("dirac:1.2"), NoiseSpec::parse("tukey"), 10};
  CHECK(sup_dev(oracle_rule(d), [](double) { return 1.2; }, -10, 10) < 1e-12);

  const DecisionRule l = oracle_rule(DGP{PriorSpec::parse("twopoint:2"), NoiseSpec::parse("laplace"), 10});
  double prev = l(-10);
  for (double x = -10; x <= 10; x += 0.01) {
    const double v = l(x);
    CHECK(v >= prev - 1e-12);
    CHECK(v >= -2.0 - 1e-12);
    CHECK(v <= 2.0 + 1e-12);
    prev = v;
  }
  // tukey oracle uses the contaminated density
  const DecisionRule tk = oracle_rule(DGP{PriorSpec::parse("twopoint:2"), NoiseSpec::parse("tukey"), 10});
  const double x = 0.7;
  const double wp = 0.8 * normal_pdf(x - 2) + 0.2 * normal_pdf((x - 2) / 3) / 3;
  const double wm = 0.8 * normal_pdf(x + 2) + 0.2 * normal_pdf((x + 2) / 3) / 3;
  CHECK(tk(x) == doctest::Approx(2 * (wp - wm) / (wp + wm)).epsilon(1e-12));
}

TEST_CASE("mean and standard error") {
  const MeanSE m = mean_se({1.0, 2.0, 3.0, std::nan("")});
  CHECK(m.count == 3);
  CHECK(m.mean == doctest::Approx(2.0));
  CHECK(m.se == doctest::Approx(std::sqrt(1.0 / 3)));
}

TEST_CASE("MLE and oracle under gaussian noise") {
  const ResultTable t = run_experiment(spec("gauss:1", "gauss", 500, {"mle", "oracle", "bayes", "linear"}, 100));
  const ResultRow& mle = row(t, "mle");
  const ResultRow& orc = row(t, "oracle");
  CHECK(std::abs(mle.mean_mse - 1.0) < 3 * mle.se);
  CHECK(orc.mean_mse < mle.mean_mse - 5 * mle.se);
  for (const auto& r : t.rows) {
    CHECK(r.mean_mse >= 0);
    CHECK(r.se > 0);
    CHECK(r.replications == 100);
    CHECK(r.failures == 0);
    CHECK(orc.mean_mse <= r.mean_mse + 3 * r.se);
  }
}

TEST_CASE("two-point design: linear rule loses to Bayes") {
  const ResultTable t = run_experiment(spec("twopoint:2", "gauss", 500, {"linear", "bayes"}, 100));
  const ResultRow& lin = row(t, "linear");
  const ResultRow& bay = row(t, "bayes");
  CHECK(lin.mean_mse > bay.mean_mse + 5 * std::hypot(lin.se, bay.se));
}

TEST_CASE("results do not depend on the worker count") {
  const ExperimentSpec s = spec("unif03", "tukey", 200, {"mle", "glmix", "hlmix:0.1", "eb_mallows:0.1", "huber:0.2"}, 6);
  set_thread_count(1);
  const ResultTable a = run_experiment(s);
  set_thread_count(4);
  const ResultTable b = run_experiment(s);
  set_thread_count(0);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].mean_mse == b.rows[i].mean_mse);
    CHECK(a.rows[i].se == b.rows[i].se);
  }
  CHECK(a.per_replication == b.per_replication);
}

TEST_CASE("per-atom MSE respects the worst-risk bound") {
  // two-point prior: group squared errors by atom for the Huber and Mallows oracle rules
  const PriorSpec p = PriorSpec::parse("twopoint:2");
  const double eps = 0.2;
  const HuberFit hf = fit_huber(p, eps);
  const double bound = 1 + std::pow(huber_k(*hf.closed), 2);
  const MallowsSolution ms = solve_mallows(assemble_problem(p.gridded(), eps));
  const double mbound = ms.stats.worst_risk;
  const DecisionRule rules[] = {hf.rule, mallows_rule(ms)};
  const double bounds[] = {bound, mbound};
  for (int k = 0; k < 2; ++k) {
    std::vector<double> errs[2];
    for (std::uint64_t r = 0; r < 40; ++r) {
      const Sample s = draw_sample(DGP{p, NoiseSpec{}, 500}, 31, r);
      for (std::size_t i = 0; i < s.x.size(); ++i) errs[s.theta[i] > 0].push_back(std::pow(rules[k](s.x[i]) - s.theta[i], 2));
    }
    for (auto& e : errs) {
      const MeanSE m = mean_se(e);
      CHECK(m.mean <= bounds[k] + 3 * m.se);
    }
  }
}

TEST_CASE("excess risk curve") {
  const PriorSpec p = PriorSpec::parse("unif03");
  const ExcessRiskCurve c = excess_risk_curve(p, 1e-6, {200}, 3, 5);
  REQUIRE(c.points.size() == 1);
  REQUIRE(c.points[0].excess.size() == 3);
  const double bayes = bayes_risk(tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), p.gridded())), p.gridded());
  CHECK(std::abs(c.oracle_risk - bayes) < 1e-3);
  for (std::size_t r = 0; r < 3; ++r) {
    // same seeding as the curve: stream (master + golden * (index + 1), replication)
    const std::uint64_t seed = 5 + 0x9e3779b97f4a7c15ULL * 1;
    const Sample s = draw_sample(DGP{p, NoiseSpec{}, 200}, seed, r);
    const NPMLEFit fit = fit_npmle(s.x);
    const double eb = bayes_risk(empirical_bayes_rule(fit), p.gridded()) - bayes;
    CHECK(std::abs(c.points[0].excess[r] - eb) < 1e-2);
    CHECK(c.points[0].excess[r] >= -1e-3);
  }
}

}
