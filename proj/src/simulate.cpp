#include "robayes/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>

#include "robayes/huber.hpp"
#include "robayes/mallows.hpp"
#include "robayes/parallel.hpp"
#include "robayes/risk.hpp"

namespace robayes {

namespace {

double parse_number(std::string_view s, std::string_view context) {
  try {
    std::size_t used = 0;
    const std::string str(s);
    const double v = std::stod(str, &used);
    if (used != str.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, "cannot parse number '" + std::string(s) + "' in " + std::string(context));
  }
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

}  // namespace

std::mt19937_64 make_rng(std::uint64_t master_seed, std::uint64_t index, std::uint64_t purpose) {
  std::seed_seq seq{std::uint32_t(master_seed), std::uint32_t(master_seed >> 32), std::uint32_t(index),
                    std::uint32_t(index >> 32),  std::uint32_t(purpose),           std::uint32_t(purpose >> 32)};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Priors and noise

PriorSpec PriorSpec::parse(std::string_view text) {
  PriorSpec p;
  p.name_ = std::string(text);
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "unif03") {
    p.kind_ = Kind::unif;
    p.a_ = 0.0;
    p.b_ = 3.0;
  } else if (head == "dirac") {
    p.kind_ = Kind::discrete;
    p.a_ = colon == std::string_view::npos ? 0.0 : parse_number(args, text);  // bare "dirac" is dirac:0
    p.grid_ = DiscreteDistribution::dirac(p.a_);
    return p;
  } else if (head == "gauss") {
    p.kind_ = Kind::gauss;
    p.a_ = parse_number(args, text);
    if (!(p.a_ > 0.0)) throw Error(Errc::invalid_argument, "gauss prior needs a positive variance");
  } else if (head == "twopoint") {
    p.kind_ = Kind::twopoint;
    p.a_ = parse_number(args, text);
    p.grid_ = DiscreteDistribution::two_point(p.a_);
    return p;
  } else if (head == "unif") {
    const auto comma = args.find(',');
    p.kind_ = Kind::unif;
    if (comma == std::string_view::npos) {
      // unif:B is shorthand for U[-B, B]
      p.b_ = parse_number(args, text);
      p.a_ = -p.b_;
    } else {
      p.a_ = parse_number(args.substr(0, comma), text);
      p.b_ = parse_number(args.substr(comma + 1), text);
    }
    if (!(p.a_ < p.b_)) throw Error(Errc::invalid_range, "unif prior needs lo < hi");
  } else {
    throw Error(Errc::invalid_argument, "unknown prior shorthand '" + std::string(text) + "'");
  }
  if (p.kind_ == Kind::gauss)
    p.grid_ = DiscreteDistribution::gaussian_grid(p.a_);
  else
    p.grid_ = DiscreteDistribution::uniform_grid(p.a_, p.b_);
  return p;
}

PriorSpec PriorSpec::from_distribution(DiscreteDistribution d, std::string name) {
  PriorSpec p;
  p.kind_ = Kind::discrete;
  p.name_ = std::move(name);
  p.grid_ = std::move(d);
  return p;
}

double PriorSpec::draw(std::mt19937_64& rng) const {
  switch (kind_) {
    case Kind::gauss: return std::sqrt(a_) * std::normal_distribution<double>()(rng);
    case Kind::unif: return std::uniform_real_distribution<double>(a_, b_)(rng);
    case Kind::twopoint: return std::uniform_real_distribution<double>()(rng) < 0.5 ? -a_ : a_;
    case Kind::discrete: {
      const double u = std::uniform_real_distribution<double>()(rng);
      const auto& w = grid_->weights();
      double acc = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        acc += w[j];
        if (u < acc) return grid_->support()[j];
      }
      return grid_->support().back();
    }
  }
  return 0.0;
}

NoiseSpec NoiseSpec::parse(std::string_view text) {
  NoiseSpec n;
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  if (head == "gauss") {
    n.kind = Kind::gauss;
  } else if (head == "laplace") {
    n.kind = Kind::laplace;
    if (colon != std::string_view::npos) n.laplace_scale = parse_number(text.substr(colon + 1), text);
    if (!(n.laplace_scale > 0.0)) throw Error(Errc::invalid_argument, "laplace scale must be positive");
  } else if (head == "tukey") {
    n.kind = Kind::tukey;
  } else {
    throw Error(Errc::invalid_argument, "unknown noise '" + std::string(text) + "'");
  }
  return n;
}

std::string NoiseSpec::name() const {
  switch (kind) {
    case Kind::gauss: return "gauss";
    case Kind::laplace: return "laplace";
    case Kind::tukey: return "tukey";
  }
  return "unknown";
}

NoiseKernel NoiseSpec::kernel() const {
  switch (kind) {
    case Kind::gauss: return NoiseKernel::gaussian();
    case Kind::laplace: return NoiseKernel::laplace(laplace_scale);
    case Kind::tukey: return NoiseKernel::contaminated_normal(0.2, 3.0);
  }
  return NoiseKernel::gaussian();
}

double NoiseSpec::draw(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::gauss: return std::normal_distribution<double>()(rng);
    case Kind::laplace: {
      const double u = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
      return -laplace_scale * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
    }
    case Kind::tukey: {
      const bool wide = std::uniform_real_distribution<double>()(rng) < 0.2;
      const double z = std::normal_distribution<double>()(rng);
      return wide ? 3.0 * z : z;
    }
  }
  return 0.0;
}

Sample draw_sample(const DGP& dgp, std::uint64_t seed, std::uint64_t index) {
  std::mt19937_64 rt = make_rng(seed, index, 1), ru = make_rng(seed, index, 2);
  Sample s;
  s.theta.resize(dgp.n);
  s.x.resize(dgp.n);
  for (std::size_t i = 0; i < dgp.n; ++i) s.theta[i] = dgp.prior.draw(rt);
  for (std::size_t i = 0; i < dgp.n; ++i) s.x[i] = s.theta[i] + dgp.noise.draw(ru);
  return s;
}

// ---------------------------------------------------------------------------
// Rules

DecisionRule linear_rule(const DiscreteDistribution& G) {
  const double mu = G.mean(), v = G.variance();
  const double c = v / (v + 1.0);
  return DecisionRule{[mu, c](double x) { return mu + c * (x - mu) - x; }, [c](double) { return c - 1.0; },
                      "linear"};
}

DecisionRule oracle_rule(const DGP& dgp) {
  return tweedie_rule(MixtureDensity(dgp.noise.kernel(), dgp.prior.gridded()), "oracle");
}

HuberFit fit_huber(const PriorSpec& prior, double eps, const SolverConfig& cfg, bool force_general) {
  const DiscreteDistribution& G = prior.gridded();
  const MixtureDensity f0(NoiseKernel::gaussian(), G);
  HuberFit out;
  auto closed = [&](HuberSolution s, const char* form) {
    out.rule = huber_rule(s);
    out.closed = std::move(s);
    out.form = form;
    return out;
  };
  if (!force_general) {
    if (G.size() == 1 && G.support()[0] == 0.0) return closed(solve_dirac(eps), "dirac");
    if (prior.kind() == PriorSpec::Kind::twopoint && prior.param_a() > 1.0)
      return closed(solve_twopoint(prior.param_a(), eps), "twopoint");
    try {
      return closed(solve_logconcave(f0, eps), "logconcave");
    } catch (const Error& e) {
      if (e.code() != Errc::not_log_concave) throw;
    }
  }
  const Grid grid = default_huber_grid();
  out.general = solve_general(f0.tabulate(grid), grid, eps, cfg);
  out.rule = general_huber_rule(*out.general);
  out.form = "general";
  return out;
}

DecisionRule huber_oracle_rule(const PriorSpec& prior, double eps, const SolverConfig& cfg) {
  return fit_huber(prior, eps, cfg).rule;
}

DecisionRule mallows_oracle_rule(const PriorSpec& prior, double eps, const SolverConfig& cfg) {
  MallowsOptions opts;
  opts.compute_worst_risk = false;
  return mallows_rule(solve_mallows(assemble_problem(prior.gridded(), eps), cfg, opts));
}

namespace {

const char* const kEpsRules[] = {"hlmix", "mlmix", "huber", "mallows", "eb_huber", "eb_mallows"};
const char* const kPlainRules[] = {"mle", "linear", "bayes", "oracle", "glmix", "llmix"};

}  // namespace

bool RuleSpec::has_eps() const {
  return std::any_of(std::begin(kEpsRules), std::end(kEpsRules), [&](const char* r) { return name == r; });
}

std::string RuleSpec::label() const {
  if (!has_eps()) return name;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s(%g)", name.c_str(), eps);
  return buf;
}

RuleSpec parse_rule(std::string_view text) {
  RuleSpec r;
  const auto colon = text.find(':');
  r.name = std::string(text.substr(0, colon));
  const bool plain = std::any_of(std::begin(kPlainRules), std::end(kPlainRules), [&](const char* n) { return r.name == n; });
  if (!plain && !r.has_eps()) throw Error(Errc::invalid_argument, "unknown rule '" + r.name + "'");
  if (r.has_eps()) {
    if (colon == std::string_view::npos) throw Error(Errc::invalid_argument, "rule '" + r.name + "' needs eps");
    r.eps = parse_number(text.substr(colon + 1), text);
    if (!(r.eps > 0.0 && r.eps < 1.0)) throw Error(Errc::invalid_epsilon, "rule eps must lie in (0, 1)");
  } else if (colon != std::string_view::npos) {
    throw Error(Errc::invalid_argument, "rule '" + r.name + "' takes no eps");
  }
  return r;
}

MeanSE mean_se(const std::vector<double>& v) {
  std::vector<double> f;
  f.reserve(v.size());
  for (double x : v)
    if (std::isfinite(x)) f.push_back(x);
  MeanSE out{std::nan(""), std::nan(""), f.size()};
  if (f.empty()) return out;
  out.mean = pairwise_sum(f.data(), f.size()) / double(f.size());
  if (f.size() < 2) return out;
  std::vector<double> d(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) d[i] = (f[i] - out.mean) * (f[i] - out.mean);
  out.se = std::sqrt(pairwise_sum(d.data(), d.size()) / double(f.size() - 1) / double(f.size()));
  return out;
}

ResultTable run_experiment(const ExperimentSpec& spec) {
  if (spec.replications < 1) throw Error(Errc::invalid_argument, "replications must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t R = spec.rules.size();
  const DGP& dgp = spec.dgp;

  // Rules that do not depend on the data, built once.
  std::vector<std::optional<DecisionRule>> fixed(R);
  std::map<double, NoiseKernel> mallows_kernels;
  for (std::size_t k = 0; k < R; ++k) {
    const RuleSpec& r = spec.rules[k];
    if (r.name == "mle")
      fixed[k] = identity_rule();
    else if (r.name == "linear")
      fixed[k] = linear_rule(dgp.prior.gridded());
    else if (r.name == "bayes")
      fixed[k] = tweedie_rule(MixtureDensity(NoiseKernel::gaussian(), dgp.prior.gridded()));
    else if (r.name == "oracle")
      fixed[k] = oracle_rule(dgp);
    else if (r.name == "huber")
      fixed[k] = huber_oracle_rule(dgp.prior, r.eps);
    else if (r.name == "mallows")
      fixed[k] = mallows_oracle_rule(dgp.prior, r.eps);
    else if (r.name == "mlmix" && !mallows_kernels.count(r.eps))
      mallows_kernels.emplace(r.eps, mallows_noise_kernel(r.eps));
  }

  std::vector<std::vector<double>> mse(R, std::vector<double>(spec.replications, std::nan("")));
  parallel_for(spec.replications, [&](std::size_t rep) {
    const Sample s = draw_sample(dgp, spec.master_seed, rep);
    NPMLEConfig base;
    base.grid_points = spec.npmle_grid_points;
    std::optional<NPMLEFit> gfit;
    auto gaussian_fit = [&]() -> const NPMLEFit& {
      if (!gfit) gfit = fit_npmle(s.x, base);
      return *gfit;
    };
    for (std::size_t k = 0; k < R; ++k) {
      const RuleSpec& r = spec.rules[k];
      try {
        DecisionRule rule;
        if (fixed[k]) {
          rule = *fixed[k];
        } else if (r.name == "glmix") {
          rule = empirical_bayes_rule(gaussian_fit());
        } else if (r.name == "eb_huber") {
          rule = empirical_huber_rule(gaussian_fit(), r.eps);
        } else if (r.name == "eb_mallows") {
          rule = empirical_mallows_rule(gaussian_fit(), r.eps);
        } else {
          NPMLEConfig c = base;
          if (r.name == "llmix")
            c.kernel = NoiseKernel::laplace(dgp.noise.laplace_scale);
          else if (r.name == "hlmix")
            c.kernel = huber_noise_kernel(r.eps);
          else
            c.kernel = mallows_kernels.at(r.eps);
          rule = empirical_bayes_rule(fit_npmle(s.x, c));
        }
        std::vector<double> sq(dgp.n);
        for (std::size_t i = 0; i < dgp.n; ++i) {
          const double e = rule(s.x[i]) - s.theta[i];
          sq[i] = e * e;
        }
        const double m = pairwise_sum(sq.data(), sq.size()) / double(dgp.n);
        mse[k][rep] = std::isfinite(m) ? m : std::nan("");
      } catch (const std::exception&) {
        mse[k][rep] = std::nan("");
      }
    }
  });

  ResultTable t;
  for (std::size_t k = 0; k < R; ++k) {
    const MeanSE ms = mean_se(mse[k]);
    const RuleSpec& r = spec.rules[k];
    t.rows.push_back(ResultRow{r.name, r.has_eps() ? r.eps : std::nan(""), ms.mean, ms.se, dgp.n, ms.count,
                               spec.replications - ms.count});
  }
  t.per_replication = std::move(mse);
  t.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return t;
}

ExcessRiskCurve excess_risk_curve(const PriorSpec& prior, double eps, const std::vector<std::size_t>& n_list,
                                  std::size_t reps, std::uint64_t master_seed, const SolverConfig& cfg) {
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (!(n_list[i] > n_list[i - 1])) throw Error(Errc::invalid_argument, "n_list must be increasing");
  const DiscreteDistribution& G0 = prior.gridded();
  ExcessRiskCurve out;
  out.oracle_risk = bayes_risk(mallows_oracle_rule(prior, eps, cfg), G0);
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    const DGP dgp{prior, NoiseSpec{}, n_list[ni]};
    std::vector<double> ex(reps, std::nan(""));
    parallel_for(reps, [&](std::size_t r) {
      const Sample s = draw_sample(dgp, master_seed + 0x9e3779b97f4a7c15ULL * (ni + 1), r);
      const NPMLEFit fit = fit_npmle(s.x);
      ex[r] = bayes_risk(empirical_mallows_rule(fit, eps, default_f_grid(), default_theta_grid(), cfg), G0) -
              out.oracle_risk;
    });
    const MeanSE ms = mean_se(ex);
    out.points.push_back(ExcessRiskPoint{n_list[ni], ms.mean, ms.se, ms.count, std::move(ex)});
  }
  return out;
}

}  // namespace robayes
