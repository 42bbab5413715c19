#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "json.hpp"

namespace hbreset {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smooth objective with the metadata first-order methods and rate
/// certificates need: dimension, strong-convexity modulus mu (0 when
/// unknown), gradient Lipschitz constant, and optionally the minimizer and
/// the optimal value.
///
/// Implementations are immutable once constructed and may be shared across
/// threads.
class ObjectiveModel {
 public:
  virtual ~ObjectiveModel() = default;

  int dim() const { return dim_; }
  double mu() const { return mu_; }
  double lipschitz() const { return lipschitz_; }
  const std::optional<Vector>& minimizer() const { return minimizer_; }
  const std::optional<double>& min_value() const { return min_value_; }

  virtual double value(const Vector& q) const = 0;
  virtual Vector gradient(const Vector& q) const = 0;
  virtual std::pair<double, Vector> value_and_gradient(const Vector& q) const {
    return {value(q), gradient(q)};
  }

  /// phi(q) - phi*. Throws std::logic_error when phi* is unknown. Models with
  /// a closed form for the gap (quadratics) override this to avoid the
  /// cancellation in value(q) - phi*.
  virtual double gap(const Vector& q) const;

  /// Attaches a reference minimizer. The gradient there must vanish to
  /// 1e-8 * max(1, |q*|) unless `check` is false.
  void set_minimizer(Vector q_star, bool check = true);
  void set_min_value(double value) { min_value_ = value; }

 protected:
  ObjectiveModel(int dim, double mu, double lipschitz);
  void check_dim(const Vector& q) const;

 private:
  int dim_;
  double mu_;
  double lipschitz_;
  std::optional<Vector> minimizer_;
  std::optional<double> min_value_;
};

struct QuadraticSpec {
  Matrix Q;  // symmetric positive definite
  Vector b;
};

/// phi(q) = 1/2 q^T Q q + b^T q.
class QuadraticModel final : public ObjectiveModel {
 public:
  /// mu and L are read off the spectrum of Q; the minimizer -Q^{-1} b and
  /// phi* are attached.
  explicit QuadraticModel(QuadraticSpec spec);

  const QuadraticSpec& spec() const { return spec_; }

  double value(const Vector& q) const override;
  Vector gradient(const Vector& q) const override;
  double gap(const Vector& q) const override;

 private:
  QuadraticSpec spec_;
};

std::pair<double, Vector> quad_eval_grad(const QuadraticSpec& spec, const Vector& q);

/// Random quadratic with spectrum pinned to [1, L]: a standard normal n x n
/// matrix is factored as U S V^T, S is replaced by singular values with
/// min 1, max sqrt(L) and the rest uniform on [1, sqrt(L)], and
/// Q = (U S' V^T)(U S' V^T)^T. Entries of b are uniform on [-100, 100].
std::shared_ptr<QuadraticModel> gen_random_quadratic(int n, double L, std::uint64_t seed);

struct LogisticSpec {
  Matrix theta;  // n x m, column i is the feature vector of observation i
  Vector labels; // entries exactly +1 or -1
  int m() const { return static_cast<int>(theta.cols()); }
  int n() const { return static_cast<int>(theta.rows()); }
};

/// phi(q) = sum_i log(1 + exp(-b_i theta_i^T q)); convex, not strongly
/// convex, so mu defaults to 0 (unknown).
class LogisticModel final : public ObjectiveModel {
 public:
  /// lipschitz <= 0 computes 1/4 lambda_max(theta theta^T).
  explicit LogisticModel(LogisticSpec spec, double lipschitz = 0.0, double mu = 0.0);

  const LogisticSpec& spec() const { return spec_; }

  double value(const Vector& q) const override;
  Vector gradient(const Vector& q) const override;
  std::pair<double, Vector> value_and_gradient(const Vector& q) const override;

 private:
  LogisticSpec spec_;
};

std::pair<double, Vector> logistic_eval_grad(const LogisticSpec& spec, const Vector& q);

/// log(1 + exp(z)) without overflow.
double softplus(double z);
/// 1 / (1 + exp(-z)) without overflow.
double sigmoid(double z);

LogisticSpec gen_logistic_dataset(int n, int m, std::uint64_t seed);

/// Runs gradient descent with step 1/L until |grad| <= grad_tol or
/// max_iter iterations, and attaches the result as minimizer and phi*.
/// Returns the final gradient norm.
double attach_gd_reference(LogisticModel& model, const Vector& q0, long max_iter = 1'000'000,
                           double grad_tol = 1e-10);

/// Largest relative discrepancy between the analytic gradient and central
/// differences with the given step, over all coordinates, divided by
/// max(1, max-norm of the analytic gradient).
double finite_diff_check(const ObjectiveModel& model, const Vector& q, double step);

nlohmann::json to_json(const QuadraticSpec& spec);
QuadraticSpec quadratic_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LogisticSpec& spec);
LogisticSpec logistic_from_json(const nlohmann::json& j);

}  // namespace hbreset
