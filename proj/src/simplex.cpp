#include "robayes/simplex.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "robayes/error.hpp"

namespace robayes {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* algorithm_name(SimplexAlgorithm a) noexcept {
  switch (a) {
    case SimplexAlgorithm::active_set_newton: return "active_set_newton";
    case SimplexAlgorithm::frank_wolfe_away_step: return "frank_wolfe_away_step";
    case SimplexAlgorithm::mirror_descent: return "mirror_descent";
    case SimplexAlgorithm::interior_point: return "interior_point";
  }
  return "unknown";
}

SimplexAlgorithm parse_algorithm(std::string_view name) {
  for (auto a : {SimplexAlgorithm::active_set_newton, SimplexAlgorithm::frank_wolfe_away_step,
                 SimplexAlgorithm::mirror_descent, SimplexAlgorithm::interior_point})
    if (name == algorithm_name(a)) return a;
  throw Error(Errc::invalid_argument, "unknown solver algorithm '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Functionals

double FisherFunctional::value(const VectorXd& y) const {
  double acc = 0.0;
  for (Index i = 0; i + 1 < y.size(); ++i) {
    const double v = 0.5 * (y[i] + y[i + 1]);
    if (v < floor_) continue;
    const double u = y[i + 1] - y[i];
    acc += u * u / (dx_ * v);
  }
  return acc;
}

void FisherFunctional::gradient(const VectorXd& y, VectorXd& g) const {
  g.setZero(y.size());
  for (Index i = 0; i + 1 < y.size(); ++i) {
    const double v = 0.5 * (y[i] + y[i + 1]);
    if (v < floor_) continue;
    const double q = (y[i + 1] - y[i]) / v;  // v*v underflows in the far tails
    const double du = 2.0 * q / dx_;
    const double dv = -q * q / dx_;
    g[i] += -du + 0.5 * dv;
    g[i + 1] += du + 0.5 * dv;
  }
}

void FisherFunctional::hessian(const VectorXd& y, HessianFactor& out) const {
  const Index r = std::max<Index>(y.size() - 1, 0);
  out.c0.resize(r);
  out.c1.resize(r);
  out.w.resize(r);
  for (Index i = 0; i < r; ++i) {
    const double v = 0.5 * (y[i] + y[i + 1]);
    if (v < floor_) {
      out.c0[i] = out.c1[i] = out.w[i] = 0.0;
      continue;
    }
    const double q = (y[i + 1] - y[i]) / v;
    out.c0[i] = -1.0 - 0.5 * q;
    out.c1[i] = 1.0 - 0.5 * q;
    out.w[i] = 2.0 / (dx_ * v);
  }
}

double NegLogLikFunctional::value(const VectorXd& y) const {
  double acc = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) return std::numeric_limits<double>::infinity();
    acc -= std::log(y[i]);
  }
  return acc / double(y.size());
}

void NegLogLikFunctional::gradient(const VectorXd& y, VectorXd& g) const {
  const double n = double(y.size());
  g.resize(y.size());
  for (Index i = 0; i < y.size(); ++i) g[i] = -1.0 / (n * y[i]);
}

void NegLogLikFunctional::hessian(const VectorXd& y, HessianFactor& out) const {
  const double n = double(y.size());
  out.c0.setOnes(y.size());
  out.c1.resize(0);
  out.w.resize(y.size());
  for (Index i = 0; i < y.size(); ++i) out.w[i] = 1.0 / (n * y[i] * y[i]);
}

// ---------------------------------------------------------------------------
// Problem

SimplexProblem::SimplexProblem(std::shared_ptr<const ConvexFunctional> phi, VectorXd offset,
                               std::shared_ptr<const MatrixXd> columns, double scale)
    : phi_(std::move(phi)), offset_(std::move(offset)), B_(std::move(columns)), scale_(scale) {
  if (!B_ || B_->rows() != offset_.size()) throw Error(Errc::length_mismatch, "map and offset dimensions differ");
  if (B_->cols() < 1) throw Error(Errc::empty_support, "problem has no candidate atoms");
}

SimplexProblem::SimplexProblem(std::shared_ptr<const ConvexFunctional> phi, VectorXd offset, double scale)
    : phi_(std::move(phi)), offset_(std::move(offset)), scale_(scale) {}

VectorXd SimplexProblem::image(const VectorXd& h) const {
  if (dense()) return offset_ + scale_ * ((*B_) * h);
  return offset_ + scale_ * h;
}

VectorXd SimplexProblem::image_direction(const std::vector<Index>& S, const VectorXd& dS) const {
  VectorXd out = VectorXd::Zero(offset_.size());
  for (std::size_t a = 0; a < S.size(); ++a) {
    if (dense())
      out.noalias() += (scale_ * dS[Index(a)]) * B_->col(S[a]);
    else
      out[S[a]] += scale_ * dS[Index(a)];
  }
  return out;
}

VectorXd SimplexProblem::vertex_direction(Index j, const VectorXd& y) const {
  VectorXd d = offset_ - y;
  if (dense())
    d.noalias() += scale_ * B_->col(j);
  else
    d[j] += scale_;
  return d;
}

VectorXd SimplexProblem::pullback(const VectorXd& gy) const {
  if (dense()) return scale_ * (B_->transpose() * gy);
  return scale_ * gy;
}

double SimplexProblem::value(const VectorXd& h) const { return phi_->value(image(h)); }

VectorXd SimplexProblem::gradient(const VectorXd& h) const {
  VectorXd gy;
  phi_->gradient(image(h), gy);
  return pullback(gy);
}

double SimplexProblem::frank_wolfe_gap(const VectorXd& h) const {
  const VectorXd g = gradient(h);
  return h.dot(g) - g.minCoeff();
}

// ---------------------------------------------------------------------------
// Solver internals

namespace {

using Clock = std::chrono::steady_clock;

double directional(const ConvexFunctional& phi, const VectorXd& y, const VectorXd& yd, double t, VectorXd& scratch,
                   VectorXd& g) {
  scratch = y + t * yd;
  phi.gradient(scratch, g);
  const double v = g.dot(yd);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

// Largest t in [0, t_end] up to which the convex restriction keeps decreasing; extra(t)
// adds the derivative of any additional term (barrier).
template <class Extra>
double line_search(const ConvexFunctional& phi, const VectorXd& y, const VectorXd& yd, double t_end, Extra extra) {
  VectorXd scratch, g;
  auto dphi = [&](double t) { return directional(phi, y, yd, t, scratch, g) + extra(t); };
  if (!(t_end > 0.0)) return 0.0;
  if (dphi(t_end) <= 0.0) return t_end;
  // Geometric bracketing first: near-zero densities can put the minimiser many decades below t_end.
  double hi = t_end, lo = t_end / 16.0;
  while (lo > 1e-300 && dphi(lo) > 0.0) {
    hi = lo;
    lo /= 16.0;
  }
  if (!(lo > 1e-300)) return 0.0;
  for (int it = 0; it < 100 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (dphi(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return lo;
}

double line_search(const ConvexFunctional& phi, const VectorXd& y, const VectorXd& yd, double t_end) {
  return line_search(phi, y, yd, t_end, [](double) { return 0.0; });
}

// R * B_S scaled by sqrt(w): rows x |S|.
MatrixXd weighted_factor(const SimplexProblem& P, const HessianFactor& hf, const std::vector<Index>& S) {
  const MatrixXd& B = *P.columns();
  const Index r = hf.rows();
  MatrixXd V(r, Index(S.size()));
  for (std::size_t a = 0; a < S.size(); ++a) {
    const auto col = B.col(S[a]);
    for (Index i = 0; i < r; ++i) {
      double v = hf.c0[i] * col[i];
      if (hf.banded()) v += hf.c1[i] * col[i + 1];
      V(i, Index(a)) = std::sqrt(hf.w[i]) * P.scale() * v;
    }
  }
  return V;
}

// Tridiagonal restriction of scale^2 R' W R to the sorted index set S.
void tridiagonal_restriction(const SimplexProblem& P, const HessianFactor& hf, const std::vector<Index>& S,
                             VectorXd& diag, VectorXd& off) {
  const Index s = Index(S.size());
  const Index r = hf.rows();
  const double s2 = P.scale() * P.scale();
  diag.setZero(s);
  off.setZero(std::max<Index>(s - 1, 0));
  for (Index a = 0; a < s; ++a) {
    const Index j = S[a];
    double d = 0.0;
    if (j < r) d += hf.w[j] * hf.c0[j] * hf.c0[j];
    if (hf.banded() && j >= 1 && j - 1 < r) d += hf.w[j - 1] * hf.c1[j - 1] * hf.c1[j - 1];
    diag[a] = s2 * d;
    if (a + 1 < s && hf.banded() && S[a + 1] == j + 1 && j < r) off[a] = s2 * hf.w[j] * hf.c0[j] * hf.c1[j];
  }
}

// Solves the equality-constrained Newton system
//   [H + D, 1; 1', 0] [d; nu] = [-g; 0]
// with diagonal scaling, a small relative regularisation and one refinement step.
class NewtonSystem {
 public:
  NewtonSystem(const SimplexProblem& P, const HessianFactor& hf, const std::vector<Index>& S, const VectorXd* extra)
      : s_(Index(S.size())) {
    if (P.dense()) {
      V_ = weighted_factor(P, hf, S);
      if (extra && s_ > 2 * V_.rows()) {
        mode_ = Mode::woodbury;
        D_ = *extra;
        MatrixXd C = MatrixXd::Identity(V_.rows(), V_.rows());
        const VectorXd dinv = D_.cwiseInverse();
        C.noalias() += V_ * dinv.asDiagonal() * V_.transpose();
        llt_.compute(C);
        sc_ = VectorXd::Ones(s_);
        return;
      }
      H_.noalias() = V_.transpose() * V_;
      if (extra) H_.diagonal() += *extra;
      mode_ = Mode::dense;
      sc_.resize(s_);
      for (Index a = 0; a < s_; ++a) sc_[a] = H_(a, a) > 0.0 ? 1.0 / std::sqrt(H_(a, a)) : 1.0;
      MatrixXd K = MatrixXd::Zero(s_ + 1, s_ + 1);
      K.topLeftCorner(s_, s_) = sc_.asDiagonal() * H_ * sc_.asDiagonal();
      K.topLeftCorner(s_, s_).diagonal().array() += 1e-13;
      K.block(0, s_, s_, 1) = sc_;
      K.block(s_, 0, 1, s_) = sc_.transpose();
      qr_.compute(K);
      K_ = std::move(K);
    } else {
      mode_ = Mode::tridiagonal;
      tridiagonal_restriction(P, hf, S, tdiag_, toff_);
      if (extra) tdiag_ += *extra;
      sc_.resize(s_);
      for (Index a = 0; a < s_; ++a) sc_[a] = tdiag_[a] > 0.0 ? 1.0 / std::sqrt(tdiag_[a]) : 1.0;
      // Scaled tridiagonal LDL'.
      ld_.resize(s_);
      ll_.resize(std::max<Index>(s_ - 1, 0));
      for (Index a = 0; a < s_; ++a) {
        double d = tdiag_[a] * sc_[a] * sc_[a] + 1e-13;
        if (a > 0) d -= ll_[a - 1] * ll_[a - 1] * ld_[a - 1];
        ld_[a] = d;
        if (a + 1 < s_) ll_[a] = toff_[a] * sc_[a] * sc_[a + 1] / d;
      }
    }
  }

  // Returns d with sum(d) = 0.
  VectorXd solve(const VectorXd& g) const {
    if (mode_ == Mode::dense) {
      VectorXd rhs(s_ + 1);
      rhs.head(s_) = -g.cwiseProduct(sc_);
      rhs[s_] = 0.0;
      VectorXd sol = qr_.solve(rhs);
      // One step of iterative refinement on the scaled bordered system.
      const VectorXd res = rhs - K_ * sol;
      sol += qr_.solve(res);
      return sol.head(s_).cwiseProduct(sc_);
    }
    // Schur complement on the constraint with refinement.
    const VectorXd b1 = -g.cwiseProduct(sc_);
    const VectorXd x2 = apply_inverse(sc_);
    const double denom = sc_.dot(x2);
    VectorXd x1 = apply_inverse(b1);
    double nu = sc_.dot(x1) / denom;
    VectorXd z = x1 - nu * x2;
    for (int pass = 0; pass < 2; ++pass) {
      const VectorXd r1 = b1 - apply(z) - nu * sc_;
      const double r2 = -sc_.dot(z);
      const VectorXd c1 = apply_inverse(r1);
      const double dnu = (sc_.dot(c1) - r2) / denom;
      z += c1 - dnu * x2;
      nu += dnu;
    }
    return z.cwiseProduct(sc_);
  }

 private:
  enum class Mode { dense, tridiagonal, woodbury };

  // Scaled matrix (with regularisation) times x.
  VectorXd apply(const VectorXd& x) const {
    if (mode_ == Mode::tridiagonal) {
      VectorXd y(s_);
      for (Index a = 0; a < s_; ++a) {
        double v = (tdiag_[a] * sc_[a] * sc_[a] + 1e-13) * x[a];
        if (a > 0) v += toff_[a - 1] * sc_[a - 1] * sc_[a] * x[a - 1];
        if (a + 1 < s_) v += toff_[a] * sc_[a] * sc_[a + 1] * x[a + 1];
        y[a] = v;
      }
      return y;
    }
    // Woodbury mode works unscaled: (D + V'V) x.
    return D_.cwiseProduct(x) + V_.transpose() * (V_ * x);
  }

  VectorXd apply_inverse(const VectorXd& b) const {
    if (mode_ == Mode::tridiagonal) {
      VectorXd x = b;
      for (Index a = 1; a < s_; ++a) x[a] -= ll_[a - 1] * x[a - 1];
      for (Index a = 0; a < s_; ++a) x[a] /= ld_[a];
      for (Index a = s_ - 2; a >= 0; --a) x[a] -= ll_[a] * x[a + 1];
      return x;
    }
    const VectorXd db = b.cwiseQuotient(D_);
    const VectorXd t = llt_.solve(V_ * db);
    return db - (V_.transpose() * t).cwiseQuotient(D_);
  }

  Index s_;
  Mode mode_ = Mode::dense;
  VectorXd sc_;
  MatrixXd V_, H_, K_;
  Eigen::ColPivHouseholderQR<MatrixXd> qr_;
  Eigen::LLT<MatrixXd> llt_;
  VectorXd D_, tdiag_, toff_, ld_, ll_;
};

// Second-order predicted decrease for moving from h toward each vertex; returns the best
// index or -1 when no vertex predicts a decrease.
Index select_vertex(const SimplexProblem& P, const VectorXd& h, const VectorXd& y, const VectorXd& g,
                    const HessianFactor& hf) {
  const Index L = P.dim();
  const double hg = h.dot(g);
  VectorXd curv(L);
  const Index r = hf.rows();
  const double s2 = P.scale() * P.scale();
  // q = R (y - offset) / scale = R B h
  VectorXd bh = (y - P.offset()) / P.scale();
  VectorXd q(r);
  for (Index i = 0; i < r; ++i) q[i] = hf.c0[i] * bh[i] + (hf.banded() ? hf.c1[i] * bh[i + 1] : 0.0);
  if (P.dense()) {
    const MatrixXd& B = *P.columns();
    for (Index j = 0; j < L; ++j) {
      const auto col = B.col(j);
      double acc = 0.0;
      if (hf.banded()) {
        for (Index i = 0; i < r; ++i) {
          const double u = hf.c0[i] * col[i] + hf.c1[i] * col[i + 1] - q[i];
          acc += hf.w[i] * u * u;
        }
      } else {
        for (Index i = 0; i < r; ++i) {
          const double u = hf.c0[i] * col[i] - q[i];
          acc += hf.w[i] * u * u;
        }
      }
      curv[j] = s2 * acc;
    }
  } else {
    double wq2 = 0.0;
    for (Index i = 0; i < r; ++i) wq2 += hf.w[i] * q[i] * q[i];
    for (Index j = 0; j < L; ++j) {
      double cross = 0.0, self = 0.0;
      if (j < r) {
        cross += hf.w[j] * q[j] * hf.c0[j];
        self += hf.w[j] * hf.c0[j] * hf.c0[j];
      }
      if (hf.banded() && j >= 1 && j - 1 < r) {
        cross += hf.w[j - 1] * q[j - 1] * hf.c1[j - 1];
        self += hf.w[j - 1] * hf.c1[j - 1] * hf.c1[j - 1];
      }
      curv[j] = s2 * std::max(0.0, wq2 - 2.0 * cross + self);
    }
  }
  Index best = -1;
  double best_dec = 0.0;
  for (Index j = 0; j < L; ++j) {
    const double s = g[j] - hg;
    if (!(s < 0.0) || h[j] > 0.0) continue;
    const double c = std::max(curv[j], 1e-300);
    const double dec = (-s <= c) ? 0.5 * s * s / c : -(s + 0.5 * c);
    if (dec > best_dec) {
      best_dec = dec;
      best = j;
    }
  }
  return best;
}

Index best_vertex(const SimplexProblem& P) {
  const Index L = P.dim();
  Index best = 0;
  double bv = std::numeric_limits<double>::infinity();
  VectorXd e = VectorXd::Zero(L);
  for (Index j = 0; j < L; ++j) {
    VectorXd y = P.offset();
    if (P.dense())
      y.noalias() += P.scale() * P.columns()->col(j);
    else
      y[j] += P.scale();
    const double v = P.functional().value(y);
    if (v < bv) {
      bv = v;
      best = j;
    }
  }
  return best;
}

struct State {
  VectorXd h, y;
  double F;
};

void refresh(const SimplexProblem& P, State& st) {
  st.y = P.image(st.h);
  st.F = P.functional().value(st.y);
}

// Newton iterations on the support of h; atoms blocked by the ratio test are dropped.
void newton_on_support(const SimplexProblem& P, State& st, std::vector<Index>& S, int max_inner, int verbosity) {
  const ConvexFunctional& phi = P.functional();
  VectorXd gy;
  HessianFactor hf;
  for (int it = 0; it < max_inner; ++it) {
    if (S.size() < 2) return;
    phi.gradient(st.y, gy);
    const Index s = Index(S.size());
    VectorXd gS(s);
    if (P.dense()) {
      for (Index a = 0; a < s; ++a) gS[a] = P.scale() * P.columns()->col(S[a]).dot(gy);
    } else {
      for (Index a = 0; a < s; ++a) gS[a] = P.scale() * gy[S[a]];
    }
    phi.hessian(st.y, hf);
    NewtonSystem sys(P, hf, S, nullptr);
    VectorXd d = sys.solve(gS);
    d.array() -= d.mean();
    const double slope = gS.dot(d);
    if (!(slope < -1e-17 * std::max(1.0, std::abs(st.F)))) return;
    double amax = std::numeric_limits<double>::infinity();
    Index block = -1;
    for (Index a = 0; a < s; ++a)
      if (d[a] < 0.0) {
        const double t = st.h[S[a]] / -d[a];
        if (t < amax) {
          amax = t;
          block = a;
        }
      }
    if (amax < 1e-10) {
      // Degenerate: atoms with negligible weight block the step. Drop every such atom at once;
      // vertex selection brings back any that are needed.
      bool dropped = false;
      for (Index a = 0; a < s; ++a)
        if (d[a] < 0.0 && st.h[S[a]] < -d[a] * 1e-10) {
          st.h[S[a]] = 0.0;
          dropped = true;
        }
      if (dropped) {
        st.h /= st.h.sum();
        refresh(P, st);
        S.erase(std::remove_if(S.begin(), S.end(), [&](Index j) { return !(st.h[j] > 0.0); }), S.end());
        continue;
      }
    }
    const double t_end = std::min(1.0, amax);
    const VectorXd yd = P.image_direction(S, d);
    const double t = line_search(phi, st.y, yd, t_end);
    if (verbosity > 2)
      std::fprintf(stderr, "  newton support=%ld slope=%.3e amax=%.3e t=%.3e F=%.17g\n", long(s), slope, amax, t, st.F);
    if (!(t > 0.0)) {
      if (block >= 0 && amax <= 1e-14) {
        st.h[S[block]] = 0.0;
        S.erase(S.begin() + block);
        refresh(P, st);
        continue;
      }
      return;
    }
    for (Index a = 0; a < s; ++a) st.h[S[a]] = std::max(0.0, st.h[S[a]] + t * d[a]);
    if (block >= 0 && t == amax) st.h[S[block]] = 0.0;
    st.h /= st.h.sum();
    refresh(P, st);
    S.erase(std::remove_if(S.begin(), S.end(), [&](Index j) { return !(st.h[j] > 0.0); }), S.end());
    if (t * d.cwiseAbs().maxCoeff() < 1e-17) return;
  }
}

// Exact line search from h toward vertex j.
double vertex_step(const SimplexProblem& P, State& st, Index j) {
  const VectorXd yd = P.vertex_direction(j, st.y);
  const double t = line_search(P.functional(), st.y, yd, 1.0);
  if (t > 0.0) {
    st.h *= 1.0 - t;
    st.h[j] += t;
    refresh(P, st);
  }
  return t;
}

void report(const SolverConfig& cfg, const char* tag, std::size_t it, double F, double gap, std::size_t s) {
  if (cfg.verbosity > 0 && (cfg.verbosity > 1 || it % 25 == 0))
    std::fprintf(stderr, "[%s] it=%zu F=%.15g gap=%.3e support=%zu\n", tag, it, F, gap, s);
}

SimplexResult run_active_set(const SimplexProblem& P, const SolverConfig& cfg, State st) {
  SimplexResult res;
  res.stats.algorithm = cfg.algorithm;
  std::vector<Index> S;
  for (Index j = 0; j < st.h.size(); ++j)
    if (st.h[j] > 0.0) S.push_back(j);
  VectorXd gy;
  HessianFactor hf;
  res.stats.trace.push_back(st.F);
  bool stalled = false;
  std::size_t it = 0;
  for (; it < cfg.max_iterations; ++it) {
    newton_on_support(P, st, S, 100, cfg.verbosity);
    P.functional().gradient(st.y, gy);
    const VectorXd g = P.pullback(gy);
    const double gap = st.h.dot(g) - g.minCoeff();
    res.stats.gap = gap;
    res.stats.trace.push_back(st.F);
    report(cfg, "active-set", it, st.F, gap, S.size());
    if (gap <= cfg.tol) {
      res.stats.converged = true;
      break;
    }
    P.functional().hessian(st.y, hf);
    const Index j = select_vertex(P, st.h, st.y, g, hf);
    if (cfg.verbosity > 2) std::fprintf(stderr, "  entering atom %ld\n", long(j));
    if (j < 0) {
      // No new atom helps, so the support solve is unfinished; continue while it makes progress.
      const double before = st.F;
      newton_on_support(P, st, S, 400, cfg.verbosity);
      if (!(st.F < before - 1e-15 * std::abs(before))) {
        if (stalled) break;
        stalled = true;
      }
      continue;
    }
    stalled = false;
    if (vertex_step(P, st, j) > 0.0) {
      S.push_back(j);
      std::sort(S.begin(), S.end());
      S.erase(std::remove_if(S.begin(), S.end(), [&](Index k) { return !(st.h[k] > 0.0); }), S.end());
    } else {
      break;
    }
  }
  res.stats.iterations = it + (res.stats.converged ? 1 : 0);
  res.h = st.h;
  res.objective = st.F;
  return res;
}

SimplexResult run_away_step(const SimplexProblem& P, const SolverConfig& cfg, State st) {
  SimplexResult res;
  res.stats.algorithm = cfg.algorithm;
  res.stats.trace.push_back(st.F);
  VectorXd gy;
  std::size_t it = 0;
  for (; it < cfg.max_iterations; ++it) {
    P.functional().gradient(st.y, gy);
    const VectorXd g = P.pullback(gy);
    const double hg = st.h.dot(g);
    Index fw;
    g.minCoeff(&fw);
    const double gap = hg - g[fw];
    res.stats.gap = gap;
    report(cfg, "away-step", it, st.F, gap, std::size_t((st.h.array() > 0).count()));
    if (gap <= cfg.tol) {
      res.stats.converged = true;
      break;
    }
    Index aw = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < st.h.size(); ++j)
      if (st.h[j] > 0.0 && g[j] > gmax) {
        gmax = g[j];
        aw = j;
      }
    if (aw >= 0 && gmax - hg > gap && st.h[aw] < 1.0) {
      // Away step: direction h - e_aw.
      const VectorXd yd = -P.vertex_direction(aw, st.y);
      const double tmax = st.h[aw] / (1.0 - st.h[aw]);
      const double t = line_search(P.functional(), st.y, yd, tmax);
      st.h *= 1.0 + t;
      st.h[aw] -= t;
      if (t == tmax) st.h[aw] = 0.0;
      st.h = st.h.cwiseMax(0.0);
      st.h /= st.h.sum();
      refresh(P, st);
    } else {
      vertex_step(P, st, fw);
    }
    res.stats.trace.push_back(st.F);
  }
  res.stats.iterations = it;
  res.h = st.h;
  res.objective = st.F;
  return res;
}

SimplexResult run_mirror_descent(const SimplexProblem& P, const SolverConfig& cfg, State st) {
  SimplexResult res;
  res.stats.algorithm = cfg.algorithm;
  res.stats.trace.push_back(st.F);
  // Exponentiated gradient needs a strictly positive start.
  st.h = 0.5 * st.h + VectorXd::Constant(st.h.size(), 0.5 / double(st.h.size()));
  refresh(P, st);
  VectorXd gy;
  double eta = 1.0;
  std::size_t it = 0;
  for (; it < cfg.max_iterations; ++it) {
    P.functional().gradient(st.y, gy);
    const VectorXd g = P.pullback(gy);
    const double gmin = g.minCoeff();
    const double gap = st.h.dot(g) - gmin;
    res.stats.gap = gap;
    report(cfg, "mirror", it, st.F, gap, std::size_t(st.h.size()));
    if (gap <= cfg.tol) {
      res.stats.converged = true;
      break;
    }
    eta *= 2.0;
    State next;
    for (int bt = 0; bt < 200; ++bt) {
      next.h = st.h.array() * (-eta * (g.array() - gmin)).exp();
      next.h /= next.h.sum();
      refresh(P, next);
      // Descent lemma in the KL geometry.
      double kl = 0.0;
      for (Index j = 0; j < next.h.size(); ++j)
        if (next.h[j] > 0.0) kl += next.h[j] * std::log(next.h[j] / st.h[j]);
      if (std::isfinite(next.F) && next.F <= st.F + g.dot(next.h - st.h) + kl / eta && next.F <= st.F) break;
      eta *= 0.5;
    }
    if (!(next.F <= st.F)) break;
    st = std::move(next);
    res.stats.trace.push_back(st.F);
  }
  res.stats.iterations = it;
  res.h = st.h;
  res.objective = st.F;
  return res;
}

// Primal log-barrier method on the full simplex.
SimplexResult run_interior_point(const SimplexProblem& P, const SolverConfig& cfg, State st) {
  SimplexResult res;
  res.stats.algorithm = cfg.algorithm;
  res.stats.trace.push_back(st.F);
  const Index L = P.dim();
  st.h = 0.5 * st.h + VectorXd::Constant(L, 0.5 / double(L));
  refresh(P, st);
  std::vector<Index> S(static_cast<std::size_t>(L));
  std::iota(S.begin(), S.end(), Index{0});
  VectorXd gy;
  HessianFactor hf;
  double mu = 1e-2 * std::max(1.0, std::abs(st.F)) / double(L);
  std::size_t it = 0;
  while (it < cfg.max_iterations) {
    // Centering for the current barrier weight.
    for (int k = 0; k < 50 && it < cfg.max_iterations; ++k, ++it) {
      P.functional().gradient(st.y, gy);
      VectorXd g = P.pullback(gy);
      g.array() -= mu / st.h.array();
      P.functional().hessian(st.y, hf);
      const VectorXd extra = mu * st.h.array().square().inverse();
      NewtonSystem sys(P, hf, S, &extra);
      VectorXd d = sys.solve(g);
      d.array() -= d.mean();
      const double slope = g.dot(d);
      if (!(slope < -1e-14 * std::max(1.0, std::abs(st.F)))) break;
      double amax = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < L; ++j)
        if (d[j] < 0.0) amax = std::min(amax, st.h[j] / -d[j]);
      const double t_end = std::min(1.0, 0.99 * amax);
      const VectorXd yd = P.image_direction(S, d);
      const VectorXd h0 = st.h;
      const double t = line_search(P.functional(), st.y, yd, t_end, [&](double tt) {
        double acc = 0.0;
        for (Index j = 0; j < L; ++j) acc -= mu * d[j] / (h0[j] + tt * d[j]);
        return acc;
      });
      if (!(t > 0.0)) break;
      st.h = (st.h + t * d).cwiseMax(1e-300);
      st.h /= st.h.sum();
      refresh(P, st);
      res.stats.trace.push_back(st.F);
    }
    P.functional().gradient(st.y, gy);
    const VectorXd g = P.pullback(gy);
    const double gap = st.h.dot(g) - g.minCoeff();
    res.stats.gap = gap;
    report(cfg, "barrier", it, st.F, gap, std::size_t(L));
    if (gap <= cfg.tol) {
      res.stats.converged = true;
      break;
    }
    if (mu < 1e-300) break;
    mu *= 0.2;
  }
  res.stats.iterations = it;
  res.h = st.h;
  res.objective = st.F;
  return res;
}

}  // namespace

SimplexResult minimize_on_simplex(const SimplexProblem& problem, const SolverConfig& cfg, const VectorXd* h0) {
  const auto start = Clock::now();
  const Index L = problem.dim();
  State st;
  if (h0) {
    if (h0->size() != L) throw Error(Errc::length_mismatch, "initial weights differ in length from the problem");
    st.h = h0->cwiseMax(0.0);
    if (!(st.h.sum() > 0.0)) throw Error(Errc::invalid_argument, "initial weights are all zero");
    st.h /= st.h.sum();
  } else {
    st.h = VectorXd::Zero(L);
    st.h[best_vertex(problem)] = 1.0;
  }
  refresh(problem, st);
  if (!std::isfinite(st.F)) throw Error(Errc::invalid_argument, "objective is not finite at the starting point");
  SimplexResult res;
  switch (cfg.algorithm) {
    case SimplexAlgorithm::active_set_newton: res = run_active_set(problem, cfg, std::move(st)); break;
    case SimplexAlgorithm::frank_wolfe_away_step: res = run_away_step(problem, cfg, std::move(st)); break;
    case SimplexAlgorithm::mirror_descent: res = run_mirror_descent(problem, cfg, std::move(st)); break;
    case SimplexAlgorithm::interior_point: res = run_interior_point(problem, cfg, std::move(st)); break;
  }
  res.stats.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

}  // namespace robayes
