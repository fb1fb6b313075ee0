#include "robayes/huber.hpp"

#include <algorithm>
#include <cmath>

namespace robayes {

namespace {

void check_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::invalid_epsilon, "eps must lie in (0, 1)");
}

// Two-point marginal and its score.
double tp_f0(double a, double x) { return 0.5 * (normal_pdf(x - a) + normal_pdf(x + a)); }
double tp_F0(double a, double x) { return 0.5 * (normal_cdf(x - a) + normal_cdf(x + a)); }
double tp_g0(double a, double x) { return -x + a * std::tanh(a * x); }

double mixture_mass(const MixtureDensity& m, double lo, double hi) {
  double acc = 0.0;
  const auto& s = m.mixing().support();
  const auto& w = m.mixing().weights();
  for (std::size_t j = 0; j < s.size(); ++j) {
    // Difference of upper tails is more accurate on the right.
    const double a = lo - s[j], b = hi - s[j];
    acc += w[j] * (a > 0 ? normal_cdf(-a) - normal_cdf(-b) : normal_cdf(b) - normal_cdf(a));
  }
  return acc;
}

struct TwoPointBranch {
  double b, c, amp2;
  bool central;
};

// b with g0(b) = -k on the decreasing branch.
double tp_solve_b(double a, double k) {
  const double xm = a > 1.0 ? std::acosh(a) / a : 0.0;
  return bracketed_root([&](double x) { return tp_g0(a, x) + k; }, xm, a + k + 10.0, 1e-15);
}

// First positive crossing of g0(x) - k tanh(kx/2), via q(x) = (g0(x) - k tanh(kx/2)) / x.
bool tp_solve_c(double a, double k, double b, double& c) {
  const double q0 = a * a - 1.0 - 0.5 * k * k;
  if (!(q0 > 0.0)) return false;
  auto q = [&](double x) { return x == 0.0 ? q0 : (tp_g0(a, x) - k * std::tanh(0.5 * k * x)) / x; };
  const int steps = 4000;
  double prev = 0.0, qprev = q0;
  for (int i = 1; i <= steps; ++i) {
    const double x = b * double(i) / steps;
    const double qx = q(x);
    if (qx <= 0.0) {
      c = bracketed_root(q, prev, x, 1e-15);
      return true;
    }
    prev = x;
    qprev = qx;
  }
  (void)qprev;
  return false;
}

double tp_tail_residual(double a, double eps, double k, double b) {
  return (1.0 - eps) * (tp_F0(a, b) - tp_F0(a, -b) + 2.0 * tp_f0(a, b) / k) - 1.0;
}

double tp_central_residual(double a, double eps, double k, double b, double c, double amp2) {
  return amp2 * (c + std::sinh(k * c) / k) + 2.0 * (1.0 - eps) * (tp_F0(a, b) - tp_F0(a, c)) +
         2.0 * (1.0 - eps) * tp_f0(a, b) / k - 1.0;
}

TwoPointBranch tp_branch(double a, double eps, double k) {
  TwoPointBranch br{};
  br.b = tp_solve_b(a, k);
  double c = 0.0;
  if (tp_solve_c(a, k, br.b, c) && c < br.b) {
    br.central = true;
    br.c = c;
    const double ch = std::cosh(0.5 * k * c);
    br.amp2 = (1.0 - eps) * tp_f0(a, c) / (ch * ch);
  }
  return br;
}

}  // namespace

DiracLF solve_dirac(double eps) {
  check_eps(eps);
  return DiracLF{huber_k(eps), eps};
}

LogConcaveLF solve_logconcave(const MixtureDensity& f0, double eps) {
  check_eps(eps);
  if (f0.kernel().kind() != NoiseKernel::Kind::gaussian)
    throw Error(Errc::invalid_argument, "solve_logconcave needs a gaussian-kernel marginal");
  const Grid g = default_f_grid();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (f0.score_derivative(g[i]) > 1e-8) throw Error(Errc::not_log_concave, "marginal is not log-concave");
  auto m = std::make_shared<const MixtureDensity>(f0);
  const auto& s = f0.mixing().support();
  const double tlo = s.front(), thi = s.back();
  const double mode = bracketed_root([&](double x) { return m->score(x); }, tlo - 1.0, thi + 1.0, 1e-14);
  auto bp = [&](double k) {
    return bracketed_root([&](double x) { return m->score(x) + k; }, mode, thi + k + 10.0, 1e-14);
  };
  auto bm = [&](double k) {
    return -bracketed_root([&](double x) { return m->score(x) - k; }, tlo - k - 10.0, mode, 1e-14);
  };
  auto resid = [&](double k) {
    const double p = bp(k), q = bm(k);
    return (1.0 - eps) * (mixture_mass(*m, -q, p) + (m->density(p) + m->density(-q)) / k) - 1.0;
  };
  double lo = 1e-3, hi = 2.0;
  if (!grow_bracket(resid, lo, hi, 1e-8, 60.0))
    throw Error(Errc::no_bracket, "no sign change for the log-concave normalisation identity");
  // grow_bracket only widens; tighten the left end if it overshot below zero.
  const double k = bracketed_root(resid, lo, hi, 1e-14);
  return LogConcaveLF{bp(k), bm(k), k, eps, m};
}

TwoPointLF solve_twopoint(double a, double eps) {
  check_eps(eps);
  if (!(a > 0.0)) throw Error(Errc::invalid_argument, "two-point prior needs a > 0");
  TwoPointLF out{};
  out.a = a;
  out.eps = eps;
  const double kc = a > 1.0 ? std::sqrt(2.0 * (a * a - 1.0)) : 0.0;
  auto tail = [&](double k) { return tp_tail_residual(a, eps, k, tp_solve_b(a, k)); };
  if (kc > 0.0 && tail(kc) < 0.0) {
    auto central = [&](double k) {
      const TwoPointBranch br = tp_branch(a, eps, k);
      if (!br.central) return tp_tail_residual(a, eps, k, br.b);
      return tp_central_residual(a, eps, k, br.b, br.c, br.amp2);
    };
    double lo = 1e-3;
    while (central(lo) < 0.0 && lo > 1e-12) lo *= 0.1;
    const double k = bracketed_root(central, lo, kc * (1.0 - 1e-12), 1e-15);
    const TwoPointBranch br = tp_branch(a, eps, k);
    out.k = k;
    out.b = br.b;
    if (br.central) {
      out.c = br.c;
      out.amp = std::sqrt(br.amp2);
    } else {
      out.tail_only = true;
    }
    return out;
  }
  // Small-eps regime: only the tails are modified.
  double lo = std::max(kc, 1e-3), hi = lo + 1.0;
  if (!grow_bracket(tail, lo, hi, 1e-8, 60.0)) throw Error(Errc::no_bracket, "no sign change for the tail identity");
  out.k = bracketed_root(tail, lo, hi, 1e-15);
  out.b = tp_solve_b(a, out.k);
  out.tail_only = true;
  return out;
}

TwoPointResiduals twopoint_residuals(const TwoPointLF& s) {
  TwoPointResiduals r{};
  r.id2 = s.k + tp_g0(s.a, s.b);
  if (s.tail_only) {
    r.id4 = tp_tail_residual(s.a, s.eps, s.k, s.b);
    return r;
  }
  r.id1 = s.amp * std::cosh(0.5 * s.k * s.c) - std::sqrt((1.0 - s.eps) * tp_f0(s.a, s.c));
  r.id3 = s.k * std::tanh(0.5 * s.k * s.c) - tp_g0(s.a, s.c);
  r.id4 = tp_central_residual(s.a, s.eps, s.k, s.b, s.c, s.amp * s.amp);
  return r;
}

LogConcaveResiduals logconcave_residuals(const LogConcaveLF& s) {
  LogConcaveResiduals r{};
  r.slope_plus = s.f0->score(s.b_plus) + s.k;
  r.slope_minus = s.f0->score(-s.b_minus) - s.k;
  r.mass = (1.0 - s.eps) * (mixture_mass(*s.f0, -s.b_minus, s.b_plus) +
                            (s.f0->density(s.b_plus) + s.f0->density(-s.b_minus)) / s.k) -
           1.0;
  return r;
}

double huber_k(const HuberSolution& s) {
  return std::visit([](const auto& v) { return v.k; }, s);
}

double huber_eps(const HuberSolution& s) {
  return std::visit([](const auto& v) { return v.eps; }, s);
}

double huber_b(const HuberSolution& s) {
  if (auto d = std::get_if<DiracLF>(&s)) return d->k;
  if (auto l = std::get_if<LogConcaveLF>(&s)) return l->b();
  return std::get<TwoPointLF>(s).b;
}

double huber_base_density(const HuberSolution& s, double x) {
  if (std::holds_alternative<DiracLF>(s)) return normal_pdf(x);
  if (auto l = std::get_if<LogConcaveLF>(&s)) return l->f0->density(x);
  return tp_f0(std::get<TwoPointLF>(s).a, x);
}

double huber_density_at(const HuberSolution& s, double x) {
  if (auto d = std::get_if<DiracLF>(&s)) {
    const double ax = std::abs(x);
    if (ax <= d->k) return (1.0 - d->eps) * normal_pdf(x);
    return (1.0 - d->eps) * normal_pdf(d->k) * std::exp(-d->k * (ax - d->k));
  }
  if (auto l = std::get_if<LogConcaveLF>(&s)) {
    const double e = 1.0 - l->eps;
    if (x > l->b_plus) return e * l->f0->density(l->b_plus) * std::exp(-l->k * (x - l->b_plus));
    if (x < -l->b_minus) return e * l->f0->density(-l->b_minus) * std::exp(l->k * (x + l->b_minus));
    return e * l->f0->density(x);
  }
  const auto& t = std::get<TwoPointLF>(s);
  const double ax = std::abs(x);
  if (ax > t.b) return (1.0 - t.eps) * tp_f0(t.a, t.b) * std::exp(-t.k * (ax - t.b));
  if (!t.tail_only && ax < t.c) {
    const double ch = std::cosh(0.5 * t.k * x);
    return t.amp * t.amp * ch * ch;
  }
  return (1.0 - t.eps) * tp_f0(t.a, x);
}

std::vector<double> huber_density(const HuberSolution& s, const Grid& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = huber_density_at(s, grid[i]);
  return v;
}

double huber_score_at(const HuberSolution& s, double x) {
  if (auto d = std::get_if<DiracLF>(&s)) {
    if (x > d->k) return -d->k;
    if (x <= -d->k) return d->k;
    return -x;
  }
  if (auto l = std::get_if<LogConcaveLF>(&s)) {
    if (x > l->b_plus) return -l->k;
    if (x <= -l->b_minus) return l->k;
    return l->f0->score(x);
  }
  const auto& t = std::get<TwoPointLF>(s);
  if (x > t.b) return -t.k;
  if (x <= -t.b) return t.k;
  if (!t.tail_only && std::abs(x) < t.c) return t.k * std::tanh(0.5 * t.k * x);
  return tp_g0(t.a, x);
}

DecisionRule huber_rule(const HuberSolution& s) {
  auto sp = std::make_shared<const HuberSolution>(s);
  auto score = [sp](double x) { return huber_score_at(*sp, x); };
  auto deriv = [sp](double x) -> double {
    const HuberSolution& h = *sp;
    if (auto d = std::get_if<DiracLF>(&h)) return (x > -d->k && x <= d->k) ? -1.0 : 0.0;
    if (auto l = std::get_if<LogConcaveLF>(&h)) return (x > -l->b_minus && x <= l->b_plus) ? l->f0->score_derivative(x) : 0.0;
    const auto& t = std::get<TwoPointLF>(h);
    if (x > t.b || x <= -t.b) return 0.0;
    if (!t.tail_only && std::abs(x) < t.c) {
      const double ch = std::cosh(0.5 * t.k * x);
      return 0.5 * t.k * t.k / (ch * ch);
    }
    const double ch = std::cosh(t.a * x);
    return -1.0 + t.a * t.a / (ch * ch);
  };
  std::vector<double> kinks;
  if (auto d = std::get_if<DiracLF>(&s)) kinks = {-d->k, d->k};
  else if (auto l = std::get_if<LogConcaveLF>(&s)) kinks = {-l->b_minus, l->b_plus};
  else {
    const auto& t = std::get<TwoPointLF>(s);
    kinks = t.tail_only ? std::vector<double>{-t.b, t.b} : std::vector<double>{-t.b, -t.c, t.c, t.b};
  }
  return DecisionRule{score, deriv, "huber", std::move(kinks)};
}

Grid default_huber_grid() { return make_uniform_grid(-30.0, 30.0, 3001); }

GeneralHuberSolution solve_general(std::span<const double> f0, const Grid& grid, double eps, const SolverConfig& cfg) {
  check_eps(eps);
  if (f0.size() != grid.size()) throw Error(Errc::length_mismatch, "f0 differs in length from the grid");
  const double dx = grid.require_spacing();
  const Eigen::Index M = Eigen::Index(grid.size());
  Eigen::VectorXd lower(M);
  double lsum = 0.0;
  for (Eigen::Index i = 0; i < M; ++i) {
    if (!(f0[std::size_t(i)] >= 0.0)) throw Error(Errc::invalid_argument, "f0 must be non-negative");
    lower[i] = (1.0 - eps) * f0[std::size_t(i)];
    lsum += lower[i] * dx;
  }
  const double mass = 1.0 - lsum;
  if (!(mass > 0.0)) throw Error(Errc::invalid_argument, "f0 carries more than unit mass on the grid");
  const SimplexProblem P(std::make_shared<FisherFunctional>(dx), lower, mass / dx);
  // Start with exponential tails at the Dirac-link rate around the centre of f0; a flat start
  // is many orders of magnitude off in the tails and the ratio test then crawls.
  double m0 = 0.0, z0 = 0.0;
  for (Eigen::Index i = 0; i < M; ++i) {
    m0 += grid[std::size_t(i)] * f0[std::size_t(i)];
    z0 += f0[std::size_t(i)];
  }
  m0 = z0 > 0.0 ? m0 / z0 : 0.5 * (grid.front() + grid.back());
  const double k0 = huber_k(eps);
  Eigen::VectorXd h0(M);
  for (Eigen::Index i = 0; i < M; ++i) h0[i] = std::exp(-k0 * std::abs(grid[std::size_t(i)] - m0));
  // Where f is tiny the gradient is badly scaled and the attainable gap is about 1e-7; the
  // certificate floor matches the active-set multiplier tolerance.
  SolverConfig c = cfg;
  c.tol = std::max(cfg.tol, 1e-6);
  SimplexResult r = minimize_on_simplex(P, c, &h0);
  const Eigen::VectorXd f = P.image(r.h);

  GeneralHuberSolution out{grid, std::vector<double>(f.data(), f.data() + M),
                           std::vector<double>(lower.data(), lower.data() + M), eps, r.objective, std::move(r.stats),
                           0.0, 0.0, std::nan(""), 0.0};
  Eigen::VectorXd gy;
  P.functional().gradient(f, gy);
  const double lambda = r.h.dot(gy);
  double amin = std::numeric_limits<double>::infinity(), fres = 0.0;
  for (Eigen::Index i = 0; i < M; ++i) {
    if (r.h[i] > 0.0)
      fres = std::max(fres, std::abs(gy[i] - lambda));
    else
      amin = std::min(amin, gy[i] - lambda);
  }
  out.kkt_active_min = std::isfinite(amin) ? amin : 0.0;
  out.kkt_free_residual = fres;
  bool symmetric = true;
  for (std::size_t i = 0; i < grid.size() && symmetric; ++i)
    symmetric = std::abs(grid[i] + grid[grid.size() - 1 - i]) < 1e-9;
  if (symmetric) {
    double mx = 0.0, fmax = 0.0;
    for (Eigen::Index i = 0; i < M; ++i) {
      mx = std::max(mx, std::abs(f[i] - f[M - 1 - i]));
      fmax = std::max(fmax, f[i]);
    }
    out.asymmetry = mx / fmax;
  }
  for (Eigen::Index i = 0; i + 1 < M; ++i) {
    const double v = 0.5 * (f[i] + f[i + 1]);
    if (v < kDensityFloor) continue;
    out.max_abs_score = std::max(out.max_abs_score, std::abs((f[i + 1] - f[i]) / (dx * v)));
  }
  return out;
}

DecisionRule general_huber_rule(const GeneralHuberSolution& s, std::string label) {
  const double dx = s.grid.require_spacing();
  const std::size_t M = s.grid.size();
  std::vector<double> mid(M - 1), score(M - 1);
  double last = 0.0;
  for (std::size_t i = 0; i + 1 < M; ++i) {
    mid[i] = s.grid[i] + 0.5 * dx;
    const double v = 0.5 * (s.f[i] + s.f[i + 1]);
    if (v >= kDensityFloor) last = (s.f[i + 1] - s.f[i]) / (dx * v);
    score[i] = last;
  }
  // Leading cells below the floor take the first resolved score.
  std::size_t first = 0;
  while (first + 1 < M - 1 && 0.5 * (s.f[first] + s.f[first + 1]) < kDensityFloor) ++first;
  for (std::size_t i = 0; i < first; ++i) score[i] = score[first];
  return tabulated_rule(Grid(std::move(mid)), std::move(score), std::move(label));
}

}  // namespace robayes
