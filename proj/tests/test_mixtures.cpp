#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "robayes/mixtures.hpp"
#include "robayes/risk.hpp"
#include "robayes/simulate.hpp"

using namespace robayes;
using testing_util::sup_dev;

namespace {

std::vector<DiscreteDistribution> test_priors() {
  return {DiscreteDistribution::dirac(0.0), DiscreteDistribution::gaussian_grid(1.0),
          DiscreteDistribution::uniform_grid(-2.0, 2.0), DiscreteDistribution::two_point(2.0)};
}

std::vector<double> tabulate(const std::function<double(double)>& f, const Grid& g) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g[i]);
  return v;
}

}  // namespace

TEST_SUITE("mixtures") {

TEST_CASE("discrete distribution validation") {
  CHECK_THROWS_AS(DiscreteDistribution({1.0, 0.0}, {0.5, 0.5}), Error);
  CHECK_THROWS_AS(DiscreteDistribution({0.0, 1.0}, {0.5, 0.6}), Error);
  CHECK_THROWS_AS(DiscreteDistribution({0.0, 1.0}, {1.0}), Error);
  CHECK_THROWS_AS(DiscreteDistribution({0.0, 1.0}, {1.1, -0.1}), Error);
  const auto d = DiscreteDistribution::normalized({2.0, 0.0, 2.0, 1.0}, {1.0, 1.0, 1.0, 0.0});
  REQUIRE(d.size() == 2);
  CHECK(d.support()[1] == 2.0);
  CHECK(d.weights()[1] == doctest::Approx(2.0 / 3.0));
  const auto g = DiscreteDistribution::gaussian_grid(2.0);
  CHECK(g.size() == 2001);
  CHECK(g.support().back() == doctest::Approx(8.0 * std::sqrt(2.0)));
  CHECK(g.variance() == doctest::Approx(2.0).epsilon(1e-6));
  const auto c = DiscreteDistribution::contaminate(DiscreteDistribution::dirac(0.0), 0.25,
                                                   DiscreteDistribution::two_point(1.0));
  CHECK(c.weights()[1] == doctest::Approx(0.75));
}

TEST_CASE("mixture density") {
  const NoiseKernel gk = NoiseKernel::gaussian();
  CHECK(MixtureDensity(gk, DiscreteDistribution::dirac(0.0)).density(0.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-15));
  CHECK(MixtureDensity(gk, DiscreteDistribution::two_point(1.0)).density(0.0) ==
        doctest::Approx(normal_pdf(1.0)).epsilon(1e-15));
  const DiscreteDistribution three({0.0, 1.0, 2.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(MixtureDensity(gk, three).density(1.0) ==
        doctest::Approx((2 * normal_pdf(1.0) + normal_pdf(0.0)) / 3).epsilon(1e-15));
  // far tail stays representable through log-sum-exp
  const MixtureDensity m(gk, DiscreteDistribution::two_point(2.0));
  CHECK(std::isfinite(m.log_density(60.0)));
  CHECK(m.log_density(60.0) == doctest::Approx(normal_log_pdf(58.0) - std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mixture score") {
  const NoiseKernel gk = NoiseKernel::gaussian();
  const MixtureDensity d0(gk, DiscreteDistribution::dirac(0.0));
  const MixtureDensity t1(gk, DiscreteDistribution::two_point(1.0));
  const MixtureDensity t2(gk, DiscreteDistribution::two_point(2.0));
  CHECK(sup_dev([&](double x) { return d0.score(x); }, [](double x) { return -x; }, -10, 10) < 1e-12);
  CHECK(sup_dev([&](double x) { return t1.score(x); }, [](double x) { return -x + std::tanh(x); }, -10, 10) < 1e-12);
  CHECK(sup_dev([&](double x) { return t2.score(x); }, [](double x) { return -x + 2 * std::tanh(2 * x); }, -10, 10) <
        1e-12);
}

TEST_CASE("score is the derivative of log density") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (const auto& G : test_priors()) {
    const MixtureDensity m(NoiseKernel::gaussian(), G);
    for (int t = 0; t < 100; ++t) {
      const double x = u(rng), h = 1e-5;
      const double fd = (m.log_density(x + h) - m.log_density(x - h)) / (2 * h);
      CHECK(std::abs(fd - m.score(x)) < std::max(1e-5, 1e-4 * std::abs(fd)));
    }
  }
}

TEST_CASE("tweedie rules") {
  const NoiseKernel gk = NoiseKernel::gaussian();
  for (double A : {0.5, 1.0, 3.0}) {
    const DecisionRule r = tweedie_rule(MixtureDensity(gk, DiscreteDistribution::gaussian_grid(A)));
    CHECK(sup_dev(r, [A](double x) { return A / (A + 1) * x; }, -5, 5) < 1e-3);
  }
  const DecisionRule c = tweedie_rule(MixtureDensity(gk, DiscreteDistribution::dirac(1.7)));
  CHECK(sup_dev(c, [](double) { return 1.7; }, -10, 10) < 1e-12);
  const DecisionRule t = tweedie_rule(MixtureDensity(gk, DiscreteDistribution::two_point(1.0)));
  CHECK(sup_dev(t, [](double x) { return std::tanh(x); }, -10, 10) < 1e-12);
}

TEST_CASE("score derivative matches finite differences") {
  const Grid g = default_f_grid();
  for (const auto& G : test_priors()) {
    const DecisionRule r = tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), G));
    REQUIRE(r.has_derivative());
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
      const double x = g[i], h = 1e-5;
      const double fd = (r.score(x + h) - r.score(x - h)) / (2 * h);
      const double an = r.score_derivative(x);
      CHECK(std::abs(fd - an) <= std::max(1e-4, 1e-3 * std::abs(an)));
      CHECK(std::isfinite(r(x)));
    }
  }
}

TEST_CASE("posterior summary is consistent") {
  const MixtureDensity m(NoiseKernel::gaussian(), DiscreteDistribution::uniform_grid(0.0, 3.0, 31));
  for (double x : {-2.0, 0.4, 1.5, 5.0}) {
    const PosteriorSummary s = m.summarize(x);
    CHECK(s.mean == doctest::Approx(x + s.score).epsilon(1e-12));
    CHECK(s.mean_derivative == doctest::Approx(1.0 + s.score_derivative).epsilon(1e-10));
    CHECK(s.mean >= 0.0);
    CHECK(s.mean <= 3.0);
  }
}

TEST_CASE("fisher information on a grid") {
  const Grid g = default_f_grid();
  const double dx = g.require_spacing();
  const double i_phi = fisher_information_grid(tabulate(normal_pdf, g), g);
  // The midpoint form is biased by about -I^2 dx^2 / 4 on this grid.
  CHECK(std::abs(i_phi - (1.0 - dx * dx / 4)) < 1e-4);
  CHECK(i_phi == doctest::Approx(testing_util::fisher_sum(tabulate(normal_pdf, g), dx)).epsilon(1e-13));
  const Grid fine = make_uniform_grid(-30, 30, 5001);
  CHECK(std::abs(fisher_information_grid(tabulate(normal_pdf, fine), fine) - 1.0) < 1e-3);

  const double s2 = std::sqrt(2.0);
  CHECK(std::abs(fisher_information_grid(tabulate([s2](double x) { return normal_pdf(x / s2) / s2; }, g), g) - 0.5) <
        1e-3);

  const Grid lg = make_uniform_grid(-30, 30, 4001);
  CHECK(std::abs(fisher_information_grid(tabulate([](double x) { return 0.5 * std::exp(-std::abs(x)); }, lg), lg) -
                 1.0) < 2e-2);

  const Grid nonuni({0.0, 0.1, 0.5, 1.0});
  try {
    fisher_information_grid(std::vector<double>{0.1, 0.2, 0.3, 0.1}, nonuni);
    FAIL("expected non-uniform-grid");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_uniform_grid);
  }
}

TEST_CASE("fisher information of mixtures") {
  const Grid g = default_f_grid();
  const NoiseKernel gk = NoiseKernel::gaussian();
  CHECK(std::abs(fisher_information_mixture(MixtureDensity(gk, DiscreteDistribution::dirac(0.0)), g) - 1.0) < 1e-6);
  CHECK(std::abs(fisher_information_mixture(MixtureDensity(gk, DiscreteDistribution::gaussian_grid(1.0)), g) - 0.5) <
        1e-3);

  // independent oracle: (f')^2 / f by Simpson on a fine grid from the closed form of phi * (two-point)
  const double a = 2.0;
  double acc = 0.0;
  const int n = 200000;
  const double lo = -40, hi = 40, h = (hi - lo) / n;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double f = 0.5 * (normal_pdf(x - a) + normal_pdf(x + a));
    const double fp = 0.5 * (-(x - a) * normal_pdf(x - a) - (x + a) * normal_pdf(x + a));
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    if (f > 0) acc += w * fp * fp / f;
  }
  const double I2 = acc * h / 3;
  const MixtureDensity m2(gk, DiscreteDistribution::two_point(a));
  CHECK(std::abs(fisher_information_mixture(m2, g) - I2) < 1e-6);
  CHECK(std::abs(bayes_risk(tweedie_rule(m2), DiscreteDistribution::two_point(a)) - (1.0 - I2)) < 2e-3);

  for (const auto& G : test_priors()) CHECK(fisher_information_mixture(MixtureDensity(gk, G), g) <= 1.0 + 1e-6);
}

TEST_CASE("mixture densities integrate to one") {
  const Grid g = default_f_grid();
  for (const auto& G : test_priors()) {
    const double v = trapezoid_integral(MixtureDensity(NoiseKernel::gaussian(), G).tabulate(g), g);
    CHECK(v >= 0.999);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("huber noise kernel") {
  const NoiseKernel h1 = huber_noise_kernel(0.1);
  CHECK(std::abs(h1.k() - 1.140) < 5e-4);
  CHECK(std::abs(huber_k(0.1) - h1.k()) < 1e-15);
  const Grid fine = make_uniform_grid(-60, 60, 240001);
  std::vector<double> dens(fine.size());
  for (std::size_t i = 0; i < fine.size(); ++i) dens[i] = h1.density(fine[i]);
  CHECK(std::abs(trapezoid_integral(dens, fine) - 1.0) < 1e-8);

  CHECK(huber_k(1e-6) > huber_k(1e-3));
  CHECK(huber_k(1e-3) > huber_k(0.1));

  const NoiseKernel h2 = huber_noise_kernel(0.2);
  const double k = h2.k();
  CHECK(h2.score(2 * k) == -k);
  CHECK(h2.score(-2 * k) == k);
  CHECK(std::abs(h2.density(k * (1 - 1e-12)) - h2.density(k * (1 + 1e-12))) < 1e-12);
  for (double u = -10; u <= 10; u += 0.01) {
    CHECK(std::abs(h2.score(u)) <= k + 1e-15);
    if (std::abs(u) <= k) CHECK(std::abs(h2.score(u) + u) < 1e-12);
    else CHECK(std::abs(std::abs(h2.score(u)) - k) < 1e-12);
  }
}

TEST_CASE("laplace noise kernel") {
  const NoiseKernel l = laplace_noise_kernel(1.0);
  CHECK(l.density(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(l.score(0.3) == -1.0);
  CHECK(l.score(-0.3) == 1.0);
  CHECK(laplace_noise_kernel(2.0).score(1.0) == -0.5);

  NoiseSpec ns = NoiseSpec::parse("laplace:1");
  std::mt19937_64 rng = make_rng(17, 0, 0);
  const std::size_t n = 1000000;
  std::vector<double> sq(n);
  double s = 0.0;
  for (auto& v : sq) {
    const double u = ns.draw(rng);
    v = u * u;
    s += v;
  }
  const double m = s / n;
  double ss = 0.0;
  for (double v : sq) ss += (v - m) * (v - m);
  const double se = std::sqrt(ss / (n - 1) / n);
  CHECK(std::abs(m - 2.0) < 3 * se);
}

TEST_CASE("tabulated kernel") {
  const Grid g = make_uniform_grid(-20, 20, 4001);
  std::vector<double> d(g.size()), sc(g.size());
  const NoiseKernel ref = NoiseKernel::contaminated_normal(0.2, 3.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    d[i] = ref.density(g[i]);
    sc[i] = ref.score(g[i]);
  }
  const NoiseKernel t = NoiseKernel::tabulated(g, d, sc);
  for (std::size_t i = 1; i + 1 < g.size(); i += 7) {
    const double fd = (t.log_density(g[i + 1]) - t.log_density(g[i - 1])) / (g[i + 1] - g[i - 1]);
    CHECK(std::abs(fd - t.score(g[i])) < 1e-3);
    CHECK(t.density(g[i]) == doctest::Approx(d[i]).epsilon(1e-10));
  }
  CHECK(t.score(40.0) == doctest::Approx(sc.back()));
}

}
