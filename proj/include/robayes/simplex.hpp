#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace robayes {

enum class SimplexAlgorithm { active_set_newton, frank_wolfe_away_step, mirror_descent, interior_point };

const char* algorithm_name(SimplexAlgorithm a) noexcept;
SimplexAlgorithm parse_algorithm(std::string_view name);

struct SolverConfig {
  double tol = 1e-9;
  std::size_t max_iterations = 5000;
  SimplexAlgorithm algorithm = SimplexAlgorithm::active_set_newton;
  int verbosity = 0;
};

struct SolverStats {
  std::size_t iterations = 0;
  double gap = std::numeric_limits<double>::infinity();
  double wall_seconds = 0.0;
  bool converged = false;
  SimplexAlgorithm algorithm = SimplexAlgorithm::active_set_newton;
  std::vector<double> trace;  // objective after each outer iteration
};

// Hessian written as R' diag(w) R where row r of R has c0[r] in column r and,
// when c1 is non-empty, c1[r] in column r + 1.
struct HessianFactor {
  Eigen::VectorXd c0, c1, w;
  bool banded() const { return c1.size() > 0; }
  Eigen::Index rows() const { return w.size(); }
};

// Convex function of a vector y.
class ConvexFunctional {
 public:
  virtual ~ConvexFunctional() = default;
  virtual double value(const Eigen::VectorXd& y) const = 0;
  virtual void gradient(const Eigen::VectorXd& y, Eigen::VectorXd& g) const = 0;
  virtual void hessian(const Eigen::VectorXd& y, HessianFactor& out) const = 0;
};

// sum_i (y_{i+1} - y_i)^2 / (dx (y_{i+1} + y_i) / 2), cells with midpoint below the floor skipped.
class FisherFunctional final : public ConvexFunctional {
 public:
  explicit FisherFunctional(double dx, double floor = 1e-300) : dx_(dx), floor_(floor) {}
  double value(const Eigen::VectorXd& y) const override;
  void gradient(const Eigen::VectorXd& y, Eigen::VectorXd& g) const override;
  void hessian(const Eigen::VectorXd& y, HessianFactor& out) const override;

 private:
  double dx_, floor_;
};

// -(1/n) sum_i log y_i
class NegLogLikFunctional final : public ConvexFunctional {
 public:
  double value(const Eigen::VectorXd& y) const override;
  void gradient(const Eigen::VectorXd& y, Eigen::VectorXd& g) const override;
  void hessian(const Eigen::VectorXd& y, HessianFactor& out) const override;
};

// Phi(offset + scale * B h) for h on the probability simplex; B is either a dense
// matrix or the identity.
class SimplexProblem {
 public:
  SimplexProblem(std::shared_ptr<const ConvexFunctional> phi, Eigen::VectorXd offset,
                 std::shared_ptr<const Eigen::MatrixXd> columns, double scale);
  SimplexProblem(std::shared_ptr<const ConvexFunctional> phi, Eigen::VectorXd offset, double scale);

  bool dense() const { return static_cast<bool>(B_); }
  Eigen::Index dim() const { return dense() ? B_->cols() : offset_.size(); }
  Eigen::Index image_dim() const { return offset_.size(); }
  const ConvexFunctional& functional() const { return *phi_; }
  const Eigen::VectorXd& offset() const { return offset_; }
  double scale() const { return scale_; }
  const Eigen::MatrixXd* columns() const { return B_.get(); }

  Eigen::VectorXd image(const Eigen::VectorXd& h) const;
  Eigen::VectorXd image_direction(const std::vector<Eigen::Index>& S, const Eigen::VectorXd& dS) const;
  // scale * B e_j - (y - offset): the image of e_j - h when y is the image of h.
  Eigen::VectorXd vertex_direction(Eigen::Index j, const Eigen::VectorXd& y) const;
  Eigen::VectorXd pullback(const Eigen::VectorXd& gy) const;
  double value(const Eigen::VectorXd& h) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& h) const;
  // max_j(-g_j) - sum_j h_j (-g_j)
  double frank_wolfe_gap(const Eigen::VectorXd& h) const;

 private:
  std::shared_ptr<const ConvexFunctional> phi_;
  Eigen::VectorXd offset_;
  std::shared_ptr<const Eigen::MatrixXd> B_;
  double scale_;
};

struct SimplexResult {
  Eigen::VectorXd h;
  double objective = 0.0;
  SolverStats stats;
};

// Starts from h0 when given, otherwise from the best single vertex.
SimplexResult minimize_on_simplex(const SimplexProblem& problem, const SolverConfig& cfg,
                                  const Eigen::VectorXd* h0 = nullptr);

}  // namespace robayes
