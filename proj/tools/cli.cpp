#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "robayes/npmle.hpp"
#include "robayes/parallel.hpp"
#include "robayes/risk.hpp"
#include "robayes/simulate.hpp"

namespace robayes::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kSubcommands = {"mallows", "huber", "npmle", "rule", "risk", "simulate", "figures"};

bool usage_code(Errc c) {
  switch (c) {
    case Errc::malformed_file:
    case Errc::unknown_subcommand:
    case Errc::invalid_argument:
    case Errc::invalid_epsilon:
    case Errc::invalid_range:
    case Errc::grid_coverage:
    case Errc::non_uniform_grid:
    case Errc::length_mismatch: return true;
    default: return false;
  }
}

json table_json(const Grid& g, const std::vector<double>& v, const char* name) {
  return json{{"x", g.points()}, {name, v}};
}

std::vector<double> evaluate(const DecisionRule& r, const Grid& g) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = r(g[i]);
  return out;
}

PriorSpec prior_from_echo(const json& echo, const std::string& where) {
  if (echo.is_string()) return PriorSpec::parse(echo.get<std::string>());
  return PriorSpec::from_distribution(distribution_from_json(echo, where));
}

double get_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number())
    throw Error(Errc::malformed_file, where + "." + key + ": missing or not a number");
  return j[key].get<double>();
}

std::string get_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string())
    throw Error(Errc::malformed_file, where + "." + key + ": missing or not a string");
  return j[key].get<std::string>();
}

json huber_params(const HuberSolution& s) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DiracLF>) {
          return json{{"k", v.k}, {"b", v.k}};
        } else if constexpr (std::is_same_v<T, LogConcaveLF>) {
          return json{{"k", v.k}, {"b", v.b()}, {"b_plus", v.b_plus}, {"b_minus", v.b_minus}};
        } else {
          return json{{"k", v.k}, {"b", v.b}, {"c", v.c}, {"amp", v.amp}, {"a", v.a}, {"tail_only", v.tail_only}};
        }
      },
      s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Documents

json mallows_json(const MallowsSolution& s, const json& prior_echo, double atom_tol) {
  json atoms = nullptr;
  try {
    atoms = distribution_json(extract_mass_points(s, atom_tol));
  } catch (const Error&) {
  }
  return json{{"kind", "mallows"},
              {"prior", prior_echo},
              {"eps", s.eps},
              {"f_grid", grid_json(s.f_grid)},
              {"theta_grid", grid_json(s.theta_grid)},
              {"objective", s.objective},
              {"contamination", atoms},
              {"atom_tol", atom_tol},
              {"least_favorable_prior", distribution_json(s.least_favorable_prior)},
              {"f_table", table_json(s.f_grid, s.f_values, "f")},
              {"stats",
               {{"algorithm", algorithm_name(s.stats.algorithm)},
                {"iterations", s.stats.iterations},
                {"gap", s.stats.gap},
                {"converged", s.stats.converged},
                {"worst_risk", s.stats.worst_risk},
                {"t", s.stats.t}}}};
}

json huber_json(const HuberFit& h, const json& prior_echo, double eps, const Grid& table_grid) {
  json j{{"kind", "huber"}, {"prior", prior_echo}, {"eps", eps}, {"form", h.form}};
  if (h.closed) {
    j["params"] = huber_params(*h.closed);
    const double k = huber_k(*h.closed);
    j["worst_risk_bound"] = 1.0 + k * k;
    j["density"] = table_json(table_grid, huber_density(*h.closed, table_grid), "f");
  } else {
    const GeneralHuberSolution& g = *h.general;
    const double k = g.max_abs_score;
    j["params"] = json{{"k", k}};
    j["worst_risk_bound"] = 1.0 + k * k;
    j["density"] = table_json(g.grid, g.f, "f");
    j["diagnostics"] = json{{"objective", g.objective},
                            {"converged", g.stats.converged},
                            {"gap", g.stats.gap},
                            {"iterations", g.stats.iterations},
                            {"kkt_active_min", g.kkt_active_min},
                            {"kkt_free_residual", g.kkt_free_residual},
                            {"asymmetry", g.asymmetry}};
  }
  j["rule"] = table_json(table_grid, evaluate(h.rule, table_grid), "delta");
  return j;
}

LoadedRule rule_from_json(const json& doc, const std::string& where) {
  if (!doc.is_object()) throw Error(Errc::malformed_file, where + ": expected a JSON object");
  const std::string kind = doc.contains("kind") && doc["kind"].is_string() ? doc["kind"].get<std::string>() : "";
  LoadedRule out;
  if (kind == "mallows") {
    const DiscreteDistribution G = distribution_from_json(doc.at("least_favorable_prior"), where + ".least_favorable_prior");
    json r{{"kind", "rule"}, {"form", "posterior_mean"}, {"label", "mallows"}, {"kernel", "gauss"},
           {"prior", distribution_json(G)}};
    if (doc.contains("contamination") && !doc["contamination"].is_null()) r["contamination"] = doc["contamination"];
    return rule_from_json(r, where);
  }
  if (kind == "npmle") {
    json r{{"kind", "rule"}, {"form", "posterior_mean"}, {"label", "eb"},
           {"kernel", get_string(doc, "kernel", where)}, {"prior", doc.at("mixing")}};
    return rule_from_json(r, where);
  }
  if (kind == "huber") {
    json r{{"kind", "rule"}, {"form", "huber"}, {"label", "huber"}, {"prior", doc.at("prior")},
           {"eps", get_number(doc, "eps", where)}, {"general", get_string(doc, "form", where) == "general"}};
    return rule_from_json(r, where);
  }
  if (kind != "rule") throw Error(Errc::malformed_file, where + ".kind: expected rule, mallows, huber or npmle");

  const std::string form = get_string(doc, "form", where);
  const std::string label = doc.contains("label") && doc["label"].is_string() ? doc["label"].get<std::string>() : form;
  out.doc = doc;
  if (form == "identity") {
    out.rule = identity_rule();
    out.score_bound = 0.0;
  } else if (form == "linear") {
    const double mu = get_number(doc, "mu", where), c = get_number(doc, "slope", where);
    out.rule = DecisionRule{[mu, c](double x) { return mu + c * (x - mu) - x; }, [c](double) { return c - 1.0; },
                            "linear"};
  } else if (form == "posterior_mean") {
    const DiscreteDistribution G = distribution_from_json(doc.at("prior"), where + ".prior");
    const NoiseKernel k = parse_kernel(get_string(doc, "kernel", where));
    out.rule = tweedie_rule(MixtureDensity(k, G), label);
    if (doc.contains("contamination") && !doc["contamination"].is_null())
      out.contamination = distribution_from_json(doc["contamination"], where + ".contamination");
  } else if (form == "huber") {
    if (!doc.contains("prior")) throw Error(Errc::malformed_file, where + ".prior: missing");
    const PriorSpec p = prior_from_echo(doc["prior"], where + ".prior");
    const bool general = doc.contains("general") && doc["general"].is_boolean() && doc["general"].get<bool>();
    HuberFit h = fit_huber(p, get_number(doc, "eps", where), {}, general);
    out.rule = h.rule;
    out.huber = h.closed;
    out.score_bound = h.closed ? huber_k(*h.closed) : h.general->max_abs_score;
  } else if (form == "table") {
    std::vector<double> x, s;
    for (const auto& v : doc.at("x")) x.push_back(v.get<double>());
    for (const auto& v : doc.at("score")) s.push_back(v.get<double>());
    out.rule = tabulated_rule(Grid(std::move(x)), std::move(s), label);
  } else {
    throw Error(Errc::malformed_file, where + ".form: unknown rule form '" + form + "'");
  }
  out.rule.label = label;
  return out;
}

LoadedRule load_rule(const std::string& arg, const PriorArg& prior) {
  if (looks_like_file(arg)) return rule_from_json(read_json_file(arg), arg);
  const RuleSpec rs = parse_rule(arg);
  const DiscreteDistribution& G = prior.spec.gridded();
  json doc;
  if (rs.name == "mle") {
    doc = json{{"kind", "rule"}, {"form", "identity"}, {"label", "mle"}};
  } else if (rs.name == "linear") {
    const double v = G.variance();
    doc = json{{"kind", "rule"}, {"form", "linear"}, {"label", "linear"}, {"mu", G.mean()}, {"slope", v / (v + 1.0)}};
  } else if (rs.name == "bayes") {
    doc = json{{"kind", "rule"}, {"form", "posterior_mean"}, {"label", "bayes"}, {"kernel", "gauss"},
               {"prior", distribution_json(G)}};
  } else if (rs.name == "huber") {
    doc = json{{"kind", "rule"}, {"form", "huber"}, {"label", "huber"}, {"prior", prior.echo}, {"eps", rs.eps}};
  } else if (rs.name == "mallows") {
    MallowsOptions opts;
    opts.compute_worst_risk = false;
    const MallowsSolution s = solve_mallows(assemble_problem(G, rs.eps), {}, opts);
    return rule_from_json(mallows_json(s, prior.echo, 1e-6), arg);
  } else {
    throw Error(Errc::invalid_argument, "rule '" + arg + "' needs data; use a file from `robayes npmle`");
  }
  return rule_from_json(doc, arg);
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

struct Globals {
  std::string out_dir = ".";
  int threads = 0;
  std::vector<std::string> argv;
};

double parse_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::invalid_epsilon, "--eps must lie in (0, 1)");
  return eps;
}

struct MallowsArgs {
  std::string prior, fgrid, tgrid, algorithm = "active_set_newton", out = "mallows.json";
  double eps = 0.0, tol = 1e-9, atom_tol = 1e-6;
  bool skip_worst = false;
};

void cmd_mallows(const Globals& g, const MallowsArgs& a, std::ostream& out) {
  const PriorArg prior = load_prior(a.prior);
  const double eps = parse_eps(a.eps);
  const Grid fg = a.fgrid.empty() ? default_f_grid() : parse_grid_arg(a.fgrid, "--fgrid");
  const Grid tg = a.tgrid.empty() ? default_theta_grid() : parse_grid_arg(a.tgrid, "--tgrid");
  SolverConfig cfg;
  cfg.tol = a.tol;
  cfg.algorithm = parse_algorithm(a.algorithm);
  RunContext ctx("mallows", g.argv, g.out_dir, manifest_for(a.out));
  ctx.config() = json{{"prior", prior.echo}, {"eps", eps},          {"fgrid", grid_json(fg)}, {"tgrid", grid_json(tg)},
                      {"tol", a.tol},        {"algorithm", a.algorithm}, {"atom_tol", a.atom_tol}, {"worst", !a.skip_worst}};
  MallowsOptions opts;
  opts.compute_worst_risk = !a.skip_worst;
  const MallowsSolution s = solve_mallows(assemble_problem(prior.spec.gridded(), eps, fg, tg), cfg, opts);
  ctx.write_json(a.out, mallows_json(s, prior.echo, a.atom_tol));
  ctx.finish();
  out << "objective " << fmt17(s.objective) << " gap " << fmt17(s.stats.gap)
      << (s.stats.converged ? " converged" : " NOT converged") << "\n";
  if (!s.stats.converged) throw Error(Errc::not_converged, "Mallows solver did not reach the requested gap (solution written)");
}

struct HuberArgs {
  std::string prior, grid = "-10,10,401", out = "huber.json";
  double eps = 0.0;
  bool general = false;
};

void cmd_huber(const Globals& g, const HuberArgs& a, std::ostream& out) {
  const PriorArg prior = load_prior(a.prior);
  const double eps = parse_eps(a.eps);
  const Grid tg = parse_grid_arg(a.grid, "--grid");
  RunContext ctx("huber", g.argv, g.out_dir, manifest_for(a.out));
  ctx.config() = json{{"prior", prior.echo}, {"eps", eps}, {"grid", grid_json(tg)}, {"general", a.general}};
  const HuberFit h = fit_huber(prior.spec, eps, {}, a.general);
  const json j = huber_json(h, prior.echo, eps, tg);
  ctx.write_json(a.out, j);
  ctx.finish();
  out << "form " << h.form << " k " << fmt17(j["params"]["k"].get<double>()) << "\n";
  if (h.general && !h.general->stats.converged)
    throw Error(Errc::not_converged, "grid Huber solver did not reach the requested gap (solution written)");
}

struct NpmleArgs {
  std::string data, kernel = "gauss", grid, algorithm = "active_set", out = "npmle.json";
  double tol = 1e-6;
  std::size_t points = 600, max_iter = 50000;
};

void cmd_npmle(const Globals& g, const NpmleArgs& a, std::ostream& out) {
  const std::vector<double> x = read_data_csv(a.data);
  NPMLEConfig cfg;
  cfg.kernel = parse_kernel(a.kernel);
  if (!a.grid.empty()) cfg.support_grid = parse_grid_arg(a.grid, "--grid");
  cfg.grid_points = a.points;
  cfg.tol = a.tol;
  cfg.max_iterations = a.max_iter;
  if (a.algorithm == "em")
    cfg.algorithm = NpmleAlgorithm::em;
  else if (a.algorithm != "active_set")
    throw Error(Errc::invalid_argument, "--algorithm must be active_set or em");
  RunContext ctx("npmle", g.argv, g.out_dir, manifest_for(a.out));
  ctx.config() = json{{"data", a.data},       {"data_sha256", sha256_hex([&] {
                                                   std::string s;
                                                   for (double v : x) s += fmt17(v) + "\n";
                                                   return s;
                                                 }())},
                      {"kernel", a.kernel},   {"grid", a.grid.empty() ? json(nullptr) : json(a.grid)},
                      {"points", a.points},   {"tol", a.tol},
                      {"algorithm", a.algorithm}, {"max_iterations", a.max_iter}};
  const NPMLEFit fit = fit_npmle(x, cfg);
  ctx.write_json(a.out, json{{"kind", "npmle"},
                             {"kernel", a.kernel},
                             {"n", x.size()},
                             {"mixing", distribution_json(fit.mixing)},
                             {"log_likelihood", fit.log_likelihood},
                             {"iterations", fit.iterations},
                             {"kkt_gap", fit.kkt_gap},
                             {"converged", fit.converged},
                             {"support_grid", grid_json(fit.support_grid)}});
  ctx.finish();
  out << "log_likelihood " << fmt17(fit.log_likelihood) << " kkt_gap " << fmt17(fit.kkt_gap) << " atoms "
      << fit.mixing.size() << "\n";
  if (!fit.converged) throw Error(Errc::not_converged, "NPMLE did not reach the requested KKT gap (fit written)");
}

struct RuleArgs {
  std::string from, prior, kind, table = "-10,10,401", out = "rule.json";
  double eps = 0.0;
};

void cmd_rule(const Globals& g, const RuleArgs& a, std::ostream& out) {
  LoadedRule r;
  json config;
  if (!a.from.empty()) {
    if (!a.kind.empty() || !a.prior.empty()) throw Error(Errc::invalid_argument, "--from excludes --prior/--kind");
    r = rule_from_json(read_json_file(a.from), a.from);
    config = json{{"from", a.from}};
  } else {
    if (a.prior.empty() || a.kind.empty()) throw Error(Errc::invalid_argument, "give --from, or --prior with --kind");
    const PriorArg prior = load_prior(a.prior);
    std::string spec = a.kind;
    if (a.kind == "huber" || a.kind == "mallows") spec += ":" + fmt17(parse_eps(a.eps));
    r = load_rule(spec, prior);
    config = json{{"prior", prior.echo}, {"kind", a.kind}, {"eps", a.eps}};
  }
  const Grid tg = parse_grid_arg(a.table, "--table");
  config["table"] = grid_json(tg);
  RunContext ctx("rule", g.argv, g.out_dir, manifest_for(a.out));
  ctx.config() = config;
  json doc = r.doc;
  doc["table"] = table_json(tg, evaluate(r.rule, tg), "delta");
  ctx.write_json(a.out, doc);
  CsvTable t({"x", "delta", "score"});
  for (std::size_t i = 0; i < tg.size(); ++i) {
    const double s = r.rule.score(tg[i]);
    t.add({fmt17(tg[i]), fmt17(tg[i] + s), fmt17(s)});
  }
  ctx.write_csv((fs::path(a.out).parent_path() / (fs::path(a.out).stem().string() + ".csv")).string(), t);
  ctx.finish();
  out << "rule " << r.rule.label << "\n";
}

struct RiskArgs {
  std::string rule, prior, mc, grid, out = "risk.csv";
  bool worst = false;
  std::size_t order = 64;
};

void cmd_risk(const Globals& g, const RiskArgs& a, std::ostream& out) {
  const PriorArg prior = load_prior(a.prior);
  const LoadedRule r = load_rule(a.rule, prior);
  const DiscreteDistribution& G = prior.spec.gridded();
  const Grid tg = a.grid.empty()
                      ? make_uniform_grid(G.support().front() - 4.0, G.support().back() + 4.0, 401)
                      : parse_grid_arg(a.grid, "--grid");
  RiskMethod method = RiskMethod::quadrature(a.order);
  MonteCarloConfig mc;
  if (!a.mc.empty()) {
    const auto comma = a.mc.find(',');
    if (comma == std::string::npos) throw Error(Errc::invalid_argument, "--mc expects B,seed");
    try {
      mc.draws = std::stoull(a.mc.substr(0, comma));
      mc.seed = std::stoull(a.mc.substr(comma + 1));
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, "--mc expects integers B,seed");
    }
    method = RiskMethod::monte_carlo(mc.draws, mc.seed);
  }
  RunContext ctx("risk", g.argv, g.out_dir, manifest_for(a.out));
  ctx.config() = json{{"rule", a.rule},   {"prior", prior.echo},         {"grid", grid_json(tg)},
                      {"worst", a.worst}, {"method", method.describe()}, {"order", a.order}};
  if (!a.mc.empty()) ctx.seeds() = json{{"monte_carlo", mc.seed}};

  const RiskCurve c = risk_curve(r.rule, tg, method);
  const double br = bayes_risk(r.rule, G);
  json worst = nullptr;
  if (a.worst) {
    WorstRiskReport w;
    if (r.huber) {
      w = worst_risk_huber(*r.huber);
    } else if (r.contamination) {
      // Monte Carlo at the heaviest contamination atom, plus the quadrature sup over the atoms.
      const auto& wts = r.contamination->weights();
      const std::size_t heavy = std::size_t(std::max_element(wts.begin(), wts.end()) - wts.begin());
      const double th = r.contamination->support()[heavy];
      const RiskEstimate e = pointwise_risk_estimate(r.rule, th, RiskMethod::monte_carlo(mc.draws, mc.seed));
      double gsup = -1.0, garg = th;
      for (double t : r.contamination->support()) {
        const double v = pointwise_risk(r.rule, t);
        if (v > gsup) {
          gsup = v;
          garg = t;
        }
      }
      w = WorstRiskReport{std::nan(""), e.value, e.se, "mc_at_heaviest_atom", th, gsup, garg, mc.seed};
      ctx.seeds()["worst_monte_carlo"] = mc.seed;
    } else {
      const double s = std::max(std::abs(G.support().front()), std::abs(G.support().back())) + 10.0;
      const RiskCurve wc = risk_curve(r.rule, make_uniform_grid(-s, s, 401), RiskMethod::composite());
      const double bound = std::isfinite(r.score_bound) ? 1.0 + r.score_bound * r.score_bound : std::nan("");
      w = WorstRiskReport{bound, wc.sup, 0.0, "grid_sup", wc.arg_sup, wc.sup, wc.arg_sup, 0};
    }
    worst = json{{"bound", w.bound},       {"estimate", w.estimate}, {"se", w.se},
                 {"estimator", w.estimator}, {"location", w.location}, {"grid_sup", w.grid_sup},
                 {"grid_arg_sup", w.grid_arg_sup}, {"seed", w.seed}};
  }

  const bool as_json = fs::path(a.out).extension() == ".json";
  if (as_json) {
    ctx.write_json(a.out, json{{"kind", "risk"},
                               {"rule", r.rule.label},
                               {"method", c.method},
                               {"bayes_risk", br},
                               {"curve", {{"theta", c.theta_grid.points()}, {"R", c.values}, {"se", c.se}}},
                               {"sup", c.sup},
                               {"arg_sup", c.arg_sup},
                               {"worst", worst}});
  } else {
    CsvTable t({"theta", "R", "method", "se"});
    for (std::size_t i = 0; i < tg.size(); ++i) t.add({fmt17(tg[i]), fmt17(c.values[i]), c.method, fmt17(c.se[i])});
    ctx.write_csv(a.out, t);
    if (a.worst) {
      const fs::path p(a.out);
      ctx.write_json((p.parent_path() / (p.stem().string() + ".worst.json")).string(),
                     json{{"kind", "worst_risk"}, {"rule", r.rule.label}, {"bayes_risk", br}, {"worst", worst}});
    }
  }
  ctx.finish();
  out << "bayes_risk " << fmt17(br) << " sup " << fmt17(c.sup) << "\n";
}

struct SimulateArgs {
  std::string spec, out = "simulate.csv", per_rep;
  std::size_t replications = 0;
};

std::vector<RuleSpec> rules_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw Error(Errc::malformed_file, where + ": expected a non-empty array");
  std::vector<RuleSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (j[i].is_string()) {
      out.push_back(parse_rule(j[i].get<std::string>()));
      continue;
    }
    if (!j[i].is_object()) throw Error(Errc::malformed_file, w + ": expected a string or {name, eps}");
    const std::string name = get_string(j[i], "name", w);
    if (!j[i].contains("eps")) {
      out.push_back(parse_rule(name));
    } else if (j[i]["eps"].is_array()) {
      for (const auto& e : j[i]["eps"]) out.push_back(parse_rule(name + ":" + fmt17(e.get<double>())));
    } else {
      out.push_back(parse_rule(name + ":" + fmt17(get_number(j[i], "eps", w))));
    }
  }
  return out;
}

void cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out) {
  const json j = read_json_file(a.spec);
  const std::string w = a.spec;
  if (!j.is_object()) throw Error(Errc::malformed_file, w + ": expected an object");
  PriorSpec prior = j.contains("prior") && j["prior"].is_object()
                        ? PriorSpec::from_distribution(distribution_from_json(j["prior"], w + ".prior"))
                        : PriorSpec::parse(get_string(j, "prior", w));
  NoiseSpec noise = j.contains("noise") ? NoiseSpec::parse(get_string(j, "noise", w)) : NoiseSpec{};
  if (j.contains("laplace_scale")) noise.laplace_scale = get_number(j, "laplace_scale", w);
  const double n = get_number(j, "n", w);
  if (!(n >= 2) || n != std::floor(n)) throw Error(Errc::malformed_file, w + ".n: expected an integer >= 2");
  ExperimentSpec spec{DGP{prior, noise, std::size_t(n)}, rules_from_json(j.at("rules"), w + ".rules")};
  if (j.contains("replications")) spec.replications = std::size_t(get_number(j, "replications", w));
  if (a.replications > 0) spec.replications = a.replications;
  if (j.contains("master_seed")) spec.master_seed = std::uint64_t(get_number(j, "master_seed", w));
  if (j.contains("npmle_grid_points")) spec.npmle_grid_points = std::size_t(get_number(j, "npmle_grid_points", w));

  RunContext ctx("simulate", g.argv, g.out_dir, manifest_for(a.out));
  json rules = json::array();
  for (const auto& r : spec.rules) rules.push_back(r.has_eps() ? r.name + ":" + fmt17(r.eps) : r.name);
  ctx.config() = json{{"prior", j["prior"]},
                      {"noise", noise.name()},
                      {"laplace_scale", noise.laplace_scale},
                      {"n", spec.dgp.n},
                      {"rules", rules},
                      {"replications", spec.replications},
                      {"master_seed", spec.master_seed},
                      {"npmle_grid_points", spec.npmle_grid_points}};
  ctx.seeds() = json{{"master_seed", spec.master_seed}};
  const ResultTable t = run_experiment(spec);
  CsvTable csv({"rule", "eps", "mean_mse", "se", "n", "replications"});
  json failures = json::object();
  for (const auto& row : t.rows) {
    csv.add({row.rule, std::isnan(row.eps) ? "" : fmt17(row.eps), fmt17(row.mean_mse), fmt17(row.se),
             std::to_string(row.n), std::to_string(row.replications)});
    failures[std::isnan(row.eps) ? row.rule : row.rule + ":" + fmt17(row.eps)] = row.failures;
  }
  ctx.config()["failures"] = failures;
  ctx.write_csv(a.out, csv);
  if (!a.per_rep.empty()) {
    std::vector<std::string> header{"replication"};
    for (const auto& r : spec.rules) header.push_back(r.label());
    CsvTable pr(header);
    for (std::size_t k = 0; k < spec.replications; ++k) {
      std::vector<std::string> row{std::to_string(k)};
      for (std::size_t i = 0; i < spec.rules.size(); ++i) row.push_back(fmt17(t.per_replication[i][k]));
      pr.add(std::move(row));
    }
    ctx.write_csv(a.per_rep, pr);
  }
  ctx.finish();
  for (const auto& row : t.rows)
    out << row.rule << (std::isnan(row.eps) ? "" : "(" + fmt17(row.eps) + ")") << " mse " << fmt17(row.mean_mse)
        << " se " << fmt17(row.se) << "\n";
}

std::string usage_text() {
  return "usage: robayes [--out-dir DIR] [--threads N] <subcommand> [options]\n"
         "subcommands: mallows, huber, npmle, rule, risk, simulate, figures\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  // Find the subcommand token before handing over to the parser so unknown names get a clear error.
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& t = args[i];
    if (t == "--out-dir" || t == "--threads") {
      ++i;
      continue;
    }
    if (t.rfind("-", 0) == 0) continue;
    if (std::find(kSubcommands.begin(), kSubcommands.end(), t) == kSubcommands.end()) {
      err << errc_name(Errc::unknown_subcommand) << ": '" << t << "'\n" << usage_text();
      return 2;
    }
    break;
  }

  CLI::App app{"Robust empirical Bayes rules for the Gaussian sequence model", "robayes"};
  app.require_subcommand(1);
  Globals g;
  g.argv = args;
  app.add_option("--out-dir", g.out_dir, "Directory all output paths are relative to");
  app.add_option("--threads", g.threads, "Worker cap (also ROBAYES_THREADS); results do not depend on it")
      ->check(CLI::NonNegativeNumber);

  MallowsArgs ma;
  auto* mal = app.add_subcommand("mallows", "Mallows least-favorable prior for an eps-contaminated prior");
  mal->add_option("--prior", ma.prior, "Prior shorthand or JSON file")->required();
  mal->add_option("--eps", ma.eps, "Contamination level in (0, 1)")->required();
  mal->add_option("--fgrid", ma.fgrid, "Density grid lo,hi,n (default -30,30,500)");
  mal->add_option("--tgrid", ma.tgrid, "Theta grid lo,hi,n (default -20,20,4003)");
  mal->add_option("--tol", ma.tol, "Frank-Wolfe gap tolerance");
  mal->add_option("--algorithm", ma.algorithm, "active_set_newton|frank_wolfe_away_step|mirror_descent|interior_point");
  mal->add_option("--atom-tol", ma.atom_tol, "Relative weight threshold for reported atoms");
  mal->add_flag("--no-worst", ma.skip_worst, "Skip the worst-risk sweep over the theta grid");
  mal->add_option("--out", ma.out, "Solution JSON");

  HuberArgs ha;
  auto* hub = app.add_subcommand("huber", "Huber least-favorable density and rule");
  hub->add_option("--prior", ha.prior, "Prior shorthand or JSON file")->required();
  hub->add_option("--eps", ha.eps, "Contamination level in (0, 1)")->required();
  hub->add_option("--grid", ha.grid, "Table grid lo,hi,n");
  hub->add_flag("--general", ha.general, "Use the grid solver even when a closed form exists");
  hub->add_option("--out", ha.out, "Solution JSON");

  NpmleArgs na;
  auto* npm = app.add_subcommand("npmle", "Kiefer-Wolfowitz NPMLE of the mixing distribution");
  npm->add_option("--data", na.data, "CSV with one numeric column")->required();
  npm->add_option("--kernel", na.kernel, "gauss|laplace[:s]|tukey|huber:eps|mallows:eps");
  npm->add_option("--grid", na.grid, "Support grid lo,hi,n");
  npm->add_option("--points", na.points, "Default support grid size");
  npm->add_option("--tol", na.tol, "KKT gap tolerance");
  npm->add_option("--algorithm", na.algorithm, "active_set|em");
  npm->add_option("--max-iterations", na.max_iter, "Iteration cap");
  npm->add_option("--out", na.out, "Fit JSON");

  RuleArgs ra;
  auto* rul = app.add_subcommand("rule", "Build a decision rule JSON and its table");
  rul->add_option("--from", ra.from, "mallows, huber or npmle JSON");
  rul->add_option("--prior", ra.prior, "Prior shorthand or JSON file");
  rul->add_option("--kind", ra.kind, "mle|linear|bayes|huber|mallows");
  rul->add_option("--eps", ra.eps, "Contamination level for huber and mallows");
  rul->add_option("--table", ra.table, "Table grid lo,hi,n");
  rul->add_option("--out", ra.out, "Rule JSON (table CSV written alongside)");

  RiskArgs ka;
  auto* rsk = app.add_subcommand("risk", "Pointwise risk curve, Bayes risk and worst-case risk");
  rsk->add_option("--rule", ka.rule, "Rule JSON or mle|linear|bayes|huber:eps|mallows:eps")->required();
  rsk->add_option("--prior", ka.prior, "Prior shorthand or JSON file")->required();
  rsk->add_flag("--worst", ka.worst, "Add the worst-case risk report");
  rsk->add_option("--mc", ka.mc, "Monte Carlo B,seed (curve and worst risk)");
  rsk->add_option("--grid", ka.grid, "Theta grid lo,hi,n");
  rsk->add_option("--order", ka.order, "Gauss-Hermite order");
  rsk->add_option("--out", ka.out, "CSV, or JSON when the name ends in .json");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Replicated simulation experiment");
  sim->add_option("--spec", sa.spec, "Experiment JSON")->required();
  sim->add_option("--out", sa.out, "Result CSV");
  sim->add_option("--replications", sa.replications, "Override the spec's replication count");
  sim->add_option("--per-replication", sa.per_rep, "Also write per-replication MSEs to this CSV");

  std::vector<std::string> figs;
  auto* fig = app.add_subcommand("figures", "Plot data for the figures");
  fig->add_option("names", figs, "fig1..fig7 or all")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (g.threads > 0) set_thread_count(std::size_t(g.threads));
    if (mal->parsed()) cmd_mallows(g, ma, out);
    if (hub->parsed()) cmd_huber(g, ha, out);
    if (npm->parsed()) cmd_npmle(g, na, out);
    if (rul->parsed()) cmd_rule(g, ra, out);
    if (rsk->parsed()) cmd_risk(g, ka, out);
    if (sim->parsed()) cmd_simulate(g, sa, out);
    if (fig->parsed()) {
      std::vector<std::string> names;
      for (const auto& n : figs) {
        if (n == "all") {
          names.insert(names.end(), figure_names().begin(), figure_names().end());
        } else if (std::find(figure_names().begin(), figure_names().end(), n) == figure_names().end()) {
          throw Error(Errc::invalid_argument, "unknown figure '" + n + "' (fig1..fig7 or all)");
        } else {
          names.push_back(n);
        }
      }
      for (const auto& n : names) {
        run_figure(n, g.out_dir, g.argv);
        out << n << " written\n";
      }
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    if (usage_code(e.code())) {
      err << usage_text();
      return 2;
    }
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace robayes::cli
