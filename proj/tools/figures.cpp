#include <cmath>
#include <functional>
#include <map>

#include "cli.hpp"
#include "robayes/npmle.hpp"
#include "robayes/risk.hpp"
#include "robayes/simulate.hpp"

namespace robayes::cli {

namespace {

MallowsSolution mallows(const DiscreteDistribution& G0, double eps, const Grid& tg = default_theta_grid()) {
  return solve_mallows(assemble_problem(G0, eps, default_f_grid(), tg));
}

void rules_table(RunContext& ctx, const std::string& file, const Grid& x,
                 const std::vector<std::pair<std::string, DecisionRule>>& rules) {
  std::vector<std::string> header{"x"};
  for (const auto& r : rules) header.push_back(r.first);
  CsvTable t(header);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<std::string> row{fmt17(x[i])};
    for (const auto& r : rules) row.push_back(fmt17(r.second(x[i])));
    t.add(std::move(row));
  }
  ctx.write_csv(file, t);
}

void risk_table(RunContext& ctx, const std::string& file, const Grid& th,
                const std::vector<std::pair<std::string, DecisionRule>>& rules) {
  std::vector<std::string> header{"theta"};
  std::vector<RiskCurve> curves;
  for (const auto& r : rules) {
    header.push_back(r.first);
    curves.push_back(risk_curve(r.second, th, RiskMethod::composite()));
  }
  CsvTable t(header);
  for (std::size_t i = 0; i < th.size(); ++i) {
    std::vector<std::string> row{fmt17(th[i])};
    for (const auto& c : curves) row.push_back(fmt17(c.values[i]));
    t.add(std::move(row));
  }
  ctx.write_csv(file, t);
}

void mass_table(RunContext& ctx, const std::string& file, const DiscreteDistribution& d, bool with_log, bool with_sqrt) {
  std::vector<std::string> header{"theta", "mass"};
  if (with_log) header.push_back("log_mass");
  if (with_sqrt) header.push_back("sqrt_mass");
  CsvTable t(header);
  for (std::size_t j = 0; j < d.size(); ++j) {
    std::vector<std::string> row{fmt17(d.support()[j]), fmt17(d.weights()[j])};
    if (with_log) row.push_back(fmt17(std::log(d.weights()[j])));
    if (with_sqrt) row.push_back(fmt17(std::sqrt(d.weights()[j])));
    t.add(std::move(row));
  }
  ctx.write_csv(file, t);
}

// Mallows least-favorable marginal, G* mass function and log mass for a Dirac base keeping 0.2 at 0.
void fig1(RunContext& ctx) {
  const double eps = 0.8;
  ctx.config() = json{{"prior", "dirac:0"}, {"eps", eps}, {"fgrid", grid_json(default_f_grid())},
                      {"tgrid", grid_json(default_theta_grid())}};
  const MallowsSolution s = mallows(DiscreteDistribution::dirac(0.0), eps);
  CsvTable dens({"x", "f"});
  for (std::size_t i = 0; i < s.f_grid.size(); ++i) dens.add({fmt17(s.f_grid[i]), fmt17(s.f_values[i])});
  ctx.write_csv("fig1_density.csv", dens);
  const DiscreteDistribution G = DiscreteDistribution::contaminate(s.base_prior, eps, extract_mass_points(s));
  mass_table(ctx, "fig1_mass.csv", G, false, false);
  mass_table(ctx, "fig1_logmass.csv", G, true, false);
}

// Risk of the Mallows rule for the two-point prior at eps 0.2 with H* atoms (rootogram lengths).
void fig2(RunContext& ctx) {
  const double eps = 0.2;
  ctx.config() = json{{"prior", "twopoint:2"}, {"eps", eps}, {"theta", grid_json(make_uniform_grid(-8, 8, 401))}};
  const MallowsSolution s = mallows(DiscreteDistribution::two_point(2.0), eps);
  const DecisionRule r = mallows_rule(s);
  const Grid th = make_uniform_grid(-8.0, 8.0, 401);
  const RiskCurve c = risk_curve(r, th);
  CsvTable t({"theta", "risk", "bound"});
  for (std::size_t i = 0; i < th.size(); ++i) t.add({fmt17(th[i]), fmt17(c.values[i]), fmt17(s.stats.worst_risk)});
  ctx.write_csv("fig2_risk.csv", t);
  mass_table(ctx, "fig2_atoms.csv", extract_mass_points(s), false, true);
}

// Dirac prior, eps 0.4: hard-thresholding Huber rule against the Mallows rule.
void fig3(RunContext& ctx) {
  const double eps = 0.4;
  const Grid x = make_uniform_grid(-10.0, 10.0, 401);
  ctx.config() = json{{"prior", "dirac:0"}, {"eps", eps}, {"x", grid_json(x)}};
  rules_table(ctx, "fig3_rules.csv", x,
              {{"huber", huber_rule(solve_dirac(eps))},
               {"mallows", mallows_rule(mallows(DiscreteDistribution::dirac(0.0), eps))}});
}

// N(0, 1) prior, eps 0.4: Bayes, limited-translation Huber and Mallows rules.
void fig4(RunContext& ctx) {
  const double eps = 0.4;
  const Grid x = make_uniform_grid(-10.0, 10.0, 401);
  const PriorSpec p = PriorSpec::parse("gauss:1");
  ctx.config() = json{{"prior", "gauss:1"}, {"eps", eps}, {"x", grid_json(x)}};
  rules_table(ctx, "fig4_rules.csv", x,
              {{"bayes", tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), p.gridded()))},
               {"huber", huber_oracle_rule(p, eps)},
               {"mallows", mallows_rule(mallows(p.gridded(), eps))}});
}

// Two-point prior at +-1 with theta restricted to [-1, 1]: Bayes (tanh), Huber and Mallows risks.
void fig5(RunContext& ctx) {
  const double eps = 0.4;
  const Grid th = make_uniform_grid(-1.0, 1.0, 201);
  const DiscreteDistribution G0 = DiscreteDistribution::two_point(1.0);
  ctx.config() = json{{"prior", "twopoint:1"}, {"eps", eps}, {"theta", grid_json(th)}, {"mallows_tgrid", grid_json(th)}};
  const DecisionRule bayes{[](double x) { return std::tanh(x) - x; },
                           [](double x) { return -std::pow(std::tanh(x), 2); }, "bayes"};
  risk_table(ctx, "fig5_risk.csv", th,
             {{"bayes", bayes},
              {"huber", huber_rule(solve_logconcave(MixtureDensity(NoiseKernel::gaussian(), G0), eps))},
              {"mallows", mallows_rule(mallows(G0, eps, th))}});
}

// Two-point prior at +-2, eps 0.2: rules and their risk functions.
void fig6(RunContext& ctx) {
  const double eps = 0.2;
  const Grid x = make_uniform_grid(-8.0, 8.0, 401);
  ctx.config() = json{{"prior", "twopoint:2"}, {"eps", eps}, {"x", grid_json(x)}, {"theta", grid_json(x)}};
  const std::vector<std::pair<std::string, DecisionRule>> rules{
      {"bayes", tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), DiscreteDistribution::two_point(2.0)))},
      {"huber", huber_rule(solve_twopoint(2.0, eps))},
      {"mallows", mallows_rule(mallows(DiscreteDistribution::two_point(2.0), eps))}};
  rules_table(ctx, "fig6_rules.csv", x, rules);
  risk_table(ctx, "fig6_risk.csv", x, rules);
}

// NPMLE from a U[0, 3] sample against its Mallows modification (eps 0.1), and the EB rules.
void fig7(RunContext& ctx) {
  const double eps = 0.1;
  const std::size_t n = 1000;
  const std::uint64_t seed = 1;
  const Grid x = make_uniform_grid(-4.0, 8.0, 401);
  ctx.config() = json{{"prior", "unif03"}, {"noise", "gauss"}, {"n", n}, {"eps", eps}, {"x", grid_json(x)}};
  ctx.seeds() = json{{"sample", seed}};
  const Sample s = draw_sample(DGP{PriorSpec::parse("unif03"), NoiseSpec{}, n}, seed);
  const NPMLEFit fit = fit_npmle(s.x);
  const MallowsSolution m = mallows(fit.mixing, eps);
  mass_table(ctx, "fig7_npmle_prior.csv", fit.mixing, false, false);
  mass_table(ctx, "fig7_mallows_prior.csv",
             DiscreteDistribution::contaminate(fit.mixing, eps, extract_mass_points(m)), false, false);
  rules_table(ctx, "fig7_rules.csv", x,
              {{"eb", empirical_bayes_rule(fit)}, {"huber", empirical_huber_rule(fit, eps)}, {"mallows", mallows_rule(m)}});
}

const std::map<std::string, std::function<void(RunContext&)>>& registry() {
  static const std::map<std::string, std::function<void(RunContext&)>> r{
      {"fig1", fig1}, {"fig2", fig2}, {"fig3", fig3}, {"fig4", fig4}, {"fig5", fig5}, {"fig6", fig6}, {"fig7", fig7}};
  return r;
}

}  // namespace

const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> n{"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"};
  return n;
}

void run_figure(const std::string& name, const std::string& out_dir, const std::vector<std::string>& argv) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw Error(Errc::invalid_argument, "unknown figure '" + name + "'");
  RunContext ctx("figures " + name, argv, out_dir, name + ".manifest.json");
  it->second(ctx);
  ctx.finish();
}

}  // namespace robayes::cli
