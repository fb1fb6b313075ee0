// One line per criterion: "criterion N: PASS|FAIL: detail". Arguments select criteria; none runs all.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cli.hpp"
#include "robayes/huber.hpp"
#include "robayes/mallows.hpp"
#include "robayes/npmle.hpp"
#include "robayes/parallel.hpp"
#include "robayes/risk.hpp"
#include "robayes/simulate.hpp"

using namespace robayes;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::vector<double> tabulate(const Grid& g, const std::function<double(double)>& f) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g[i]);
  return v;
}

double normal_density(double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(2 * M_PI * var); }

Verdict fisher_calibration() {
  const Grid g = default_f_grid();
  const double i1 = fisher_information_grid(tabulate(g, [](double x) { return normal_density(x, 1); }), g);
  const double i2 = fisher_information_grid(tabulate(g, [](double x) { return normal_density(x, 2); }), g);
  const bool ok1 = std::abs(i1 - 1.0) <= 1e-3, ok2 = std::abs(i2 - 0.5) <= 1e-3;
  return {ok1 && ok2, fmt::format("I(phi)={:.6f} [{}] I(N(0,2))={:.6f} [{}]", i1, ok1 ? "ok" : "off by more than 1e-3", i2,
                                  ok2 ? "ok" : "off by more than 1e-3")};
}

Verdict brown() {
  bool ok = true;
  std::string d;
  for (const char* p : {"dirac:0", "gauss:1", "unif:-2,2", "twopoint:2"}) {
    const double gap = brown_identity_gap(PriorSpec::parse(p).gridded());
    ok = ok && gap < 2e-3;
    d += fmt::format("{} gap={:.2e} ", p, gap);
  }
  return {ok, d};
}

Verdict casella_strawderman() {
  const DecisionRule t{[](double x) { return std::tanh(x) - x; }, [](double x) { return -std::pow(std::tanh(x), 2); },
                       "tanh"};
  const MixtureDensity f0(NoiseKernel::gaussian(), DiscreteDistribution::two_point(1.0));
  const DecisionRule h = huber_rule(solve_logconcave(f0, 0.4));
  const Grid th = make_uniform_grid(-1, 1, 201);
  const RiskMethod m = RiskMethod::composite();
  double mx = -1, arg = 0, min_gap = 1e300;
  for (std::size_t i = 0; i < th.size(); ++i) {
    const double rt = pointwise_risk(t, th[i], m);
    if (rt > mx) mx = rt, arg = th[i];
    min_gap = std::min(min_gap, pointwise_risk(h, th[i], m) - rt);
  }
  const bool ok = std::abs(mx - 0.45) <= 0.01 && std::abs(std::abs(arg) - 1.0) <= 0.01 && min_gap > 0;
  return {ok, fmt::format("max R(tanh)={:.4f} at theta={:+.2f}; min R(huber)-R(tanh)={:.4f}", mx, arg, min_gap)};
}

Verdict twopoint_worst() {
  const TwoPointLF hs = solve_twopoint(2.0, 0.2);
  const double bound = worst_risk_huber(hs).bound;
  const MallowsSolution s = solve_mallows(assemble_problem(DiscreteDistribution::two_point(2.0), 0.2));
  const WorstRiskReport w = worst_risk_mallows(s, MonteCarloConfig{1000000, 20240601});
  const bool ok = std::abs(bound - 1.67) <= 0.05 && std::abs(w.estimate - 1.67) <= 0.05;
  return {ok, fmt::format("huber 1+k^2={:.4f}; mallows mc={:.4f} (se {:.4f}) at theta={:.3f}", bound, w.estimate, w.se,
                          w.location)};
}

Verdict mallows_structure() {
  const MallowsSolution s = solve_mallows(assemble_problem(DiscreteDistribution::dirac(0.0), 0.8));
  const DiscreteDistribution H = extract_mass_points(s);
  const double edge = s.theta_grid.back() - 1e-9;
  std::vector<double> x, y, right;
  for (std::size_t j = 0; j < H.size(); ++j) {
    const double a = H.support()[j];
    if (a > 0) right.push_back(a);
    if (a == 0.0 || std::abs(a) >= edge) continue;
    x.push_back(std::abs(a));
    y.push_back(std::log(H.weights()[j]));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size(), my /= y.size();
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  const std::vector<double> target{1.96, 1.80, 1.70, 1.61, 1.52, 1.39, 1.29, 1.37, 1.55, 1.70, 1.91};
  std::string sp;
  double worst = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (i + 1 >= right.size()) {
      worst = 1e300;
      break;
    }
    const double d = right[i + 1] - right[i];
    worst = std::max(worst, std::abs(d - target[i]));
    sp += fmt::format("{:.2f} ", d);
  }
  const bool ok = r2 > 0.98 && worst <= 0.15;
  return {ok, fmt::format("R2={:.4f} over {} atoms; right spacings {}(max dev {:.3f})", r2, x.size(), sp, worst)};
}

double sup_rel(const std::vector<double>& got, const std::vector<double>& ref) {
  double m = 0;
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (ref[i] > 1e-8) m = std::max(m, std::abs(got[i] - ref[i]) / ref[i]);
  return m;
}

Verdict oracle_equivalence() {
  const Grid g = default_huber_grid();
  const GeneralHuberSolution d = solve_general(tabulate(g, normal_pdf), g, 0.1);
  const double ed = sup_rel(d.f, huber_density(solve_dirac(0.1), g));
  const GeneralHuberSolution t =
      solve_general(tabulate(g, [](double x) { return 0.5 * (normal_pdf(x - 2) + normal_pdf(x + 2)); }), g, 0.2);
  const double et = sup_rel(t.f, huber_density(solve_twopoint(2.0, 0.2), g));
  return {ed <= 1e-2 && et <= 1e-2, fmt::format("dirac sup rel err={:.2e}; two-point sup rel err={:.2e}", ed, et)};
}

Verdict tangency() {
  const MallowsSolution s = solve_mallows(assemble_problem(DiscreteDistribution::two_point(2.0), 0.2));
  const DecisionRule r = mallows_rule(s);
  const RiskCurve c = risk_curve(r, s.theta_grid);
  const DiscreteDistribution H = extract_mass_points(s);
  double worst = 0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < H.size(); ++j) {
    if (H.weights()[j] <= 1e-3) continue;
    ++n;
    worst = std::max(worst, 1.0 - pointwise_risk(r, H.support()[j]) / c.sup);
  }
  return {n > 0 && worst <= 0.02, fmt::format("{} atoms, grid sup={:.4f}, largest shortfall={:.3f}%", n, c.sup, 100 * worst)};
}

Verdict npmle_certificates() {
  const PriorSpec p = PriorSpec::parse("unif03");
  const MixtureDensity truth(NoiseKernel::gaussian(), p.gridded());
  bool ok = true;
  double max_gap = 0, min_margin = 1e300;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Sample s = draw_sample(DGP{p, NoiseSpec{}, 500}, seed);
    const NPMLEFit fit = fit_npmle(s.x);
    const double margin = fit.log_likelihood - log_likelihood(s.x, truth);
    ok = ok && fit.converged && fit.kkt_gap <= 1e-6 && margin >= 0;
    max_gap = std::max(max_gap, fit.kkt_gap);
    min_margin = std::min(min_margin, margin);
  }
  return {ok, fmt::format("max kkt gap={:.2e}; min loglik over truth={:.3f}", max_gap, min_margin)};
}

Verdict excess_risk() {
  const ExcessRiskCurve c = excess_risk_curve(PriorSpec::parse("unif03"), 0.1, {100, 500, 2000}, 50, 2024);
  bool ok = c.points.front().mean_excess > c.points.back().mean_excess;
  std::string d;
  for (const auto& p : c.points) {
    ok = ok && p.replications == 50 && p.mean_excess >= -3 * p.se;
    d += fmt::format("n={} mean={:.4f} se={:.4f}; ", p.n, p.mean_excess, p.se);
  }
  return {ok, d + fmt::format("oracle risk={:.4f}", c.oracle_risk)};
}

ExperimentSpec experiment(const char* noise, std::vector<const char*> rules) {
  ExperimentSpec s{DGP{PriorSpec::parse("unif03"), NoiseSpec::parse(noise), 500}, {}, 100, 17};
  for (const char* r : rules) s.rules.push_back(parse_rule(r));
  return s;
}

Verdict simulation_sanity() {
  const ResultTable g = run_experiment(
      experiment("gauss", {"mle", "oracle", "linear", "glmix", "eb_huber:0.1", "eb_mallows:0.1", "huber:0.1", "mallows:0.1"}));
  const ResultRow& mle = g.rows[0];
  const ResultRow& orc = g.rows[1];
  bool ok = std::abs(mle.mean_mse - 1) <= 3 * mle.se;
  std::string d = fmt::format("gauss: mle={:.4f}+-{:.4f} oracle={:.4f}", mle.mean_mse, mle.se, orc.mean_mse);
  for (const auto& r : g.rows) {
    if (orc.mean_mse > r.mean_mse + 3 * r.se) {
      ok = false;
      d += " beaten by " + r.rule;
    }
  }
  const ResultTable t = run_experiment(experiment(
      "tukey", {"glmix", "llmix", "hlmix:0.025", "hlmix:0.05", "hlmix:0.1", "hlmix:0.2", "mlmix:0.025", "mlmix:0.05",
                "mlmix:0.1", "mlmix:0.2", "oracle"}));
  // paired differences against GLmix, replication by replication
  double best_z = -1e300;
  std::string best;
  for (std::size_t k = 1; k + 1 < t.rows.size(); ++k) {
    std::vector<double> diff(t.per_replication[0].size());
    for (std::size_t r = 0; r < diff.size(); ++r) diff[r] = t.per_replication[0][r] - t.per_replication[k][r];
    const MeanSE m = mean_se(diff);
    const double z = m.mean / m.se;
    if (z > best_z) best_z = z, best = fmt::format("{}({}): gain {:.4f} se {:.4f}", t.rows[k].rule, t.rows[k].eps, m.mean, m.se);
  }
  ok = ok && best_z >= 3;
  const ResultRow& torc = t.rows.back();
  for (const auto& r : t.rows)
    if (torc.mean_mse > r.mean_mse + 3 * r.se) ok = false, d += " tukey oracle beaten by " + r.rule;
  return {ok, d + fmt::format("; tukey glmix={:.4f} best robust {} (z={:.1f})", t.rows[0].mean_mse, best, best_z)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "robayes_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "spec.json") << R"({"prior": "unif03", "noise": "tukey", "n": 300, "replications": 12,
    "master_seed": 99, "rules": ["mle", "oracle", "glmix", "llmix", {"name": "hlmix", "eps": [0.1]},
    {"name": "mlmix", "eps": [0.1]}, {"name": "eb_mallows", "eps": [0.1]}]})";
  std::vector<std::string> bodies;
  std::string d;
  for (const char* t : {"1", "4", "8"}) {
    const fs::path out = root / (std::string("w") + t);
    std::ostringstream o, e;
    const int code = cli::dispatch({"--out-dir", out.string(), "--threads", t, "simulate", "--spec",
                                    (root / "spec.json").string(), "--out", "sim.csv"},
                                   o, e);
    set_thread_count(0);
    if (code != 0) return {false, fmt::format("simulate with {} workers exited {}: {}", t, code, e.str())};
    bodies.push_back(slurp(out / "sim.csv"));
  }
  const bool ok = !bodies[0].empty() && bodies[0] == bodies[1] && bodies[0] == bodies[2];
  return {ok, fmt::format("{} bytes; identical across 1, 4, 8 workers: {}", bodies[0].size(), ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Verdict()>> criteria{
      {1, fisher_calibration}, {2, brown},           {3, casella_strawderman}, {4, twopoint_worst},
      {5, mallows_structure},  {6, oracle_equivalence}, {7, tangency},        {8, npmle_certificates},
      {9, excess_risk},        {10, simulation_sanity}, {11, determinism}};
  std::vector<int> pick;
  for (int i = 1; i < argc; ++i) pick.push_back(std::atoi(argv[i]));
  if (pick.empty())
    for (const auto& [k, _] : criteria) pick.push_back(k);
  int failed = 0;
  for (int k : pick) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s: %s (%.1fs)\n", k, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed ? 1 : 0;
}
