#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace hbreset::sdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // column i pairs with values(i)
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is at most
/// 1e-13 * |A|_F. Throws std::invalid_argument when the input is not square,
/// larger than 16 x 16, or asymmetric beyond 1e-10 relative.
SymmetricEigen symmetric_eig(const Matrix& a);

/// True iff the largest eigenvalue of the symmetric matrix is <= tol.
bool check_nsd(const Matrix& a, double tol);

/// v -> constant + sum_k v[index_k] * coefficient_k, all symmetric and of one
/// size.
class AffineMatrixMap {
 public:
  AffineMatrixMap() = default;
  explicit AffineMatrixMap(Matrix constant);

  /// Adds coefficient * v[var]; repeated variables accumulate.
  AffineMatrixMap& add(int var, const Matrix& coefficient);

  Matrix evaluate(const Vector& v) const;
  int size() const { return static_cast<int>(constant_.rows()); }
  const Matrix& constant() const { return constant_; }
  const std::vector<std::pair<int, Matrix>>& terms() const { return terms_; }

 private:
  Matrix constant_;
  std::vector<std::pair<int, Matrix>> terms_;
};

struct ConstraintBlock {
  std::string name;
  AffineMatrixMap map;
  // Extra room granted to this block: it must satisfy
  // lambda_max <= -margin + allowance. Zero for strict LMIs.
  double allowance = 0.0;
};

struct Normalization {
  std::vector<std::pair<int, double>> weights;  // sum_k w_k v[index_k] = rhs
  double rhs = 1.0;
};

struct VariableBound {
  double lo = -1.0;
  double hi = 1.0;
};

/// Find v with every nsd block <= -margin I and every pd block >= margin I,
/// with v[i] >= floor for the listed nonnegative variables, inside the box
/// given by `bounds` and on the normalization hyperplane.
struct FeasProblem {
  int num_vars = 0;
  std::vector<std::string> var_names;
  std::vector<ConstraintBlock> nsd_blocks;
  std::vector<ConstraintBlock> pd_blocks;
  std::vector<std::pair<int, double>> nonneg;
  std::optional<Normalization> normalization;
  std::vector<VariableBound> bounds;  // empty means [-1, 1] for every variable
  double margin = 1e-9;

  /// Throws std::invalid_argument on malformed problems.
  void validate() const;
};

enum class FeasStatus { kFeasible, kInfeasible, kIndeterminate };

const char* to_string(FeasStatus status);

struct FeasResult {
  FeasStatus status = FeasStatus::kIndeterminate;
  Vector v;                 // best point found (valid when feasible)
  double worst_eig = 0.0;   // max over blocks of lambda_max(sign * block) - allowance, at v
  double lower_bound = 0.0; // certified lower bound on that quantity over the domain
  int oracle_calls = 0;
};

/// Max over blocks of (lambda_max of the sign-adjusted block - allowance).
/// Convex in v. When `subgradient` is non-null it receives a subgradient.
double max_block_eigenvalue(const FeasProblem& problem, const Vector& v,
                            Vector* subgradient = nullptr);

struct SolveOptions {
  int max_oracle_calls = 6000;
  // Stop a feasible solve once (best - lower bound) <= gap_rel * |best|.
  double gap_rel = 1e-3;
};

/// Minimizes max_block_eigenvalue over the box intersected with the
/// normalization hyperplane by a deep-cut ellipsoid method in the
/// hyperplane's coordinates. Each oracle call yields the lower bound
/// f(c) - sqrt(g^T E g) on the minimum. Returns FEASIBLE once the best value
/// is <= -margin and re-verifies every block at margin/2 before returning;
/// INFEASIBLE once the lower bound exceeds -margin; INDETERMINATE when the
/// oracle budget runs out first.
FeasResult solve_feasibility(const FeasProblem& problem, const SolveOptions& options = {});

nlohmann::json to_json(const FeasProblem& problem);
nlohmann::json to_json(const FeasResult& result);

}  // namespace hbreset::sdp
