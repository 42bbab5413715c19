#include "hbreset/sdp_feas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hbreset::sdp {

SymmetricEigen symmetric_eig(const Matrix& a) {
  const auto n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("symmetric_eig: matrix is not square");
  if (n > 16) throw std::invalid_argument("symmetric_eig: dimension exceeds 16");
  const double scale = a.norm();
  if ((a - a.transpose()).norm() > 1e-10 * std::max(scale, std::numeric_limits<double>::min())) {
    throw std::invalid_argument("symmetric_eig: matrix is not symmetric");
  }

  Matrix A = 0.5 * (a + a.transpose());
  Matrix V = Matrix::Identity(n, n);
  const double target = 1e-13 * scale;

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += 2.0 * A(p, q) * A(p, q);
    if (std::sqrt(off) <= target) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double tau = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p);
          const double akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k);
          const double aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = 0.0;
        A(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = V(k, p);
          const double vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return A(i, i) < A(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = A(order[k], order[k]);
    out.vectors.col(k) = V.col(order[k]);
  }
  return out;
}

bool check_nsd(const Matrix& a, double tol) {
  if (a.rows() == 0) return true;
  return symmetric_eig(a).values(a.rows() - 1) <= tol;
}

// ---------------------------------------------------------------------------

AffineMatrixMap::AffineMatrixMap(Matrix constant) : constant_(std::move(constant)) {
  if (constant_.rows() != constant_.cols()) throw std::invalid_argument("affine map: non-square constant");
}

AffineMatrixMap& AffineMatrixMap::add(int var, const Matrix& coefficient) {
  if (coefficient.rows() != constant_.rows() || coefficient.cols() != constant_.cols()) {
    throw std::invalid_argument("affine map: coefficient size mismatch");
  }
  for (auto& [index, m] : terms_) {
    if (index == var) {
      m += coefficient;
      return *this;
    }
  }
  terms_.emplace_back(var, coefficient);
  return *this;
}

Matrix AffineMatrixMap::evaluate(const Vector& v) const {
  Matrix out = constant_;
  for (const auto& [index, m] : terms_) out += v(index) * m;
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(FeasStatus status) {
  switch (status) {
    case FeasStatus::kFeasible: return "FEASIBLE";
    case FeasStatus::kInfeasible: return "INFEASIBLE";
    case FeasStatus::kIndeterminate: return "INDETERMINATE";
  }
  return "?";
}

void FeasProblem::validate() const {
  if (num_vars < 0) throw std::invalid_argument("negative variable count");
  if (nsd_blocks.empty() && pd_blocks.empty()) {
    throw std::invalid_argument("feasibility problem needs at least one block");
  }
  auto check_block = [&](const ConstraintBlock& block) {
    const Matrix& c = block.map.constant();
    if ((c - c.transpose()).norm() > 1e-12 * std::max(1.0, c.norm())) {
      throw std::invalid_argument("block '" + block.name + "' has an asymmetric constant");
    }
    for (const auto& [index, m] : block.map.terms()) {
      if (index < 0 || index >= num_vars) {
        throw std::invalid_argument("block '" + block.name + "' references a missing variable");
      }
      if ((m - m.transpose()).norm() > 1e-12 * std::max(1.0, m.norm())) {
        throw std::invalid_argument("block '" + block.name + "' has an asymmetric coefficient");
      }
    }
  };
  for (const auto& b : nsd_blocks) check_block(b);
  for (const auto& b : pd_blocks) check_block(b);
  for (const auto& [index, floor] : nonneg) {
    if (index < 0 || index >= num_vars) throw std::invalid_argument("nonneg index out of range");
    (void)floor;
  }
  if (normalization) {
    if (normalization->weights.empty()) throw std::invalid_argument("empty normalization");
    for (const auto& [index, w] : normalization->weights) {
      if (index < 0 || index >= num_vars) {
        throw std::invalid_argument("normalization references a missing variable");
      }
      (void)w;
    }
  }
  if (!bounds.empty()) {
    if (static_cast<int>(bounds.size()) != num_vars) throw std::invalid_argument("bounds size mismatch");
    for (const auto& b : bounds) {
      if (!(b.lo <= b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi)) {
        throw std::invalid_argument("variable bounds must be finite with lo <= hi");
      }
    }
  }
  if (!(margin >= 0.0)) throw std::invalid_argument("margin must be nonnegative");
}

double max_block_eigenvalue(const FeasProblem& problem, const Vector& v, Vector* subgradient) {
  double worst = -std::numeric_limits<double>::infinity();
  const ConstraintBlock* arg_block = nullptr;
  double arg_sign = 1.0;
  Vector arg_vec;
  int arg_scalar = -1;

  auto consider = [&](const ConstraintBlock& block, double sign) {
    const Matrix m = sign * block.map.evaluate(v);
    const SymmetricEigen eig = symmetric_eig(m);
    const double top = eig.values(eig.values.size() - 1) - block.allowance;
    if (top > worst) {
      worst = top;
      arg_block = &block;
      arg_sign = sign;
      arg_vec = eig.vectors.col(eig.values.size() - 1);
      arg_scalar = -1;
    }
  };
  for (const auto& b : problem.nsd_blocks) consider(b, 1.0);
  for (const auto& b : problem.pd_blocks) consider(b, -1.0);
  for (const auto& [index, floor] : problem.nonneg) {
    const double value = floor - v(index);
    if (value > worst) {
      worst = value;
      arg_block = nullptr;
      arg_scalar = index;
    }
  }

  if (subgradient != nullptr) {
    subgradient->setZero(problem.num_vars);
    if (arg_block != nullptr) {
      for (const auto& [index, m] : arg_block->map.terms()) {
        (*subgradient)(index) += arg_sign * arg_vec.dot(m * arg_vec);
      }
    } else if (arg_scalar >= 0) {
      (*subgradient)(arg_scalar) = -1.0;
    }
  }
  return worst;
}

namespace {

// Localization ellipsoid {center + J u : |u| <= 1} in d reduced coordinates.
// d == 1 degenerates to an interval and is tracked exactly.
class Ellipsoid {
 public:
  Ellipsoid(int d, double radius) : d_(d), center_(Vector::Zero(d)), J_(radius * Matrix::Identity(d, d)) {}

  const Vector& center() const { return center_; }

  // sqrt(g^T E g) for E = J J^T.
  double width(const Vector& g) const { return (J_.transpose() * g).norm(); }

  // Keeps {x : g^T (x - c) <= -depth}, depth >= 0. Returns false when the
  // kept part of the ellipsoid is empty.
  bool cut(const Vector& g, double depth) {
    const Vector Jtg = J_.transpose() * g;
    const double w = Jtg.norm();
    if (w == 0.0) return depth <= 0.0;
    const double alpha = depth / w;
    if (alpha >= 1.0) return false;
    const Vector p = Jtg / w;
    if (d_ == 1) {
      // Interval [c - r, c + r] with r = |J|; keep the side opposite to g.
      const double r = std::abs(J_(0, 0));
      const double dir = g(0) > 0.0 ? 1.0 : -1.0;
      const double lo = center_(0) - r;
      const double hi = center_(0) + r;
      const double limit = center_(0) - dir * alpha * r;
      const double new_lo = dir > 0.0 ? lo : limit;
      const double new_hi = dir > 0.0 ? limit : hi;
      center_(0) = 0.5 * (new_lo + new_hi);
      J_(0, 0) = 0.5 * (new_hi - new_lo);
      return true;
    }
    const double d = d_;
    center_ -= ((1.0 + d * alpha) / (d + 1.0)) * (J_ * p);
    const double shrink = std::sqrt(d * d * (1.0 - alpha * alpha) / (d * d - 1.0));
    const double tau = 2.0 * (1.0 + d * alpha) / ((d + 1.0) * (1.0 + alpha));
    const double gamma = 1.0 - std::sqrt(std::max(0.0, 1.0 - tau));
    const Vector Jp = J_ * p;
    J_ = shrink * (J_ - gamma * Jp * p.transpose());
    return true;
  }

 private:
  int d_;
  Vector center_;
  Matrix J_;
};

struct ReducedFrame {
  Vector origin;  // point on the normalization hyperplane
  Matrix basis;   // N x d, orthonormal columns spanning the hyperplane's directions
  double radius = 0.0;
};

ReducedFrame make_frame(const FeasProblem& problem, const std::vector<VariableBound>& bounds) {
  const int N = problem.num_vars;
  Vector center(N), half(N);
  for (int i = 0; i < N; ++i) {
    center(i) = 0.5 * (bounds[static_cast<std::size_t>(i)].lo + bounds[static_cast<std::size_t>(i)].hi);
    half(i) = 0.5 * (bounds[static_cast<std::size_t>(i)].hi - bounds[static_cast<std::size_t>(i)].lo);
  }
  ReducedFrame frame;
  // Points of the box lie within the half-diagonal of its center, and
  // projecting the center onto the hyperplane only shortens that distance.
  frame.radius = std::max(half.norm(), 1e-12);
  if (!problem.normalization) {
    frame.origin = center;
    frame.basis = Matrix::Identity(N, N);
    return frame;
  }
  Vector w = Vector::Zero(N);
  for (const auto& [index, weight] : problem.normalization->weights) w(index) += weight;
  const double ww = w.squaredNorm();
  if (ww == 0.0) throw std::invalid_argument("normalization weights vanish");
  frame.origin = center + ((problem.normalization->rhs - w.dot(center)) / ww) * w;
  Eigen::HouseholderQR<Matrix> qr(w);
  const Matrix Q = qr.householderQ() * Matrix::Identity(N, N);
  frame.basis = Q.rightCols(N - 1);
  return frame;
}

bool verify(const FeasProblem& problem, const Vector& v) {
  const double tol = -0.5 * problem.margin;
  for (const auto& b : problem.nsd_blocks) {
    if (!check_nsd(b.map.evaluate(v), tol + b.allowance)) return false;
  }
  for (const auto& b : problem.pd_blocks) {
    if (!check_nsd(-b.map.evaluate(v), tol + b.allowance)) return false;
  }
  for (const auto& [index, floor] : problem.nonneg) {
    if (v(index) < floor) return false;
  }
  if (problem.normalization) {
    double s = 0.0;
    for (const auto& [index, weight] : problem.normalization->weights) s += weight * v(index);
    if (std::abs(s - problem.normalization->rhs) > 1e-9 * std::max(1.0, std::abs(problem.normalization->rhs))) {
      return false;
    }
  }
  return true;
}

}  // namespace

FeasResult solve_feasibility(const FeasProblem& problem, const SolveOptions& options) {
  problem.validate();
  const int N = problem.num_vars;
  std::vector<VariableBound> bounds = problem.bounds;
  if (bounds.empty()) bounds.assign(static_cast<std::size_t>(N), VariableBound{});

  FeasResult result;
  if (N == 0) {
    result.v = Vector();
    result.worst_eig = max_block_eigenvalue(problem, result.v);
    result.lower_bound = result.worst_eig;
    result.oracle_calls = 1;
    result.status = result.worst_eig <= -problem.margin && verify(problem, result.v)
                        ? FeasStatus::kFeasible
                        : FeasStatus::kInfeasible;
    return result;
  }

  const ReducedFrame frame = make_frame(problem, bounds);
  const int d = static_cast<int>(frame.basis.cols());
  if (d == 0) {
    result.v = frame.origin;
    result.worst_eig = max_block_eigenvalue(problem, result.v);
    result.lower_bound = result.worst_eig;
    result.oracle_calls = 1;
    result.status = result.worst_eig <= -problem.margin && verify(problem, result.v)
                        ? FeasStatus::kFeasible
                        : FeasStatus::kInfeasible;
    return result;
  }

  Ellipsoid ellipsoid(d, frame.radius);
  double best = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  Vector best_v = frame.origin;
  Vector g_full(N);
  int calls = 0;
  int box_cuts = 0;
  bool exhausted_region = false;

  while (calls < options.max_oracle_calls) {
    const Vector v = frame.origin + frame.basis * ellipsoid.center();

    // Box feasibility cut on the most violated bound.
    int worst_index = -1;
    double worst_violation = 0.0;
    double direction = 0.0;
    for (int i = 0; i < N; ++i) {
      const auto& b = bounds[static_cast<std::size_t>(i)];
      if (v(i) - b.hi > worst_violation) {
        worst_violation = v(i) - b.hi;
        worst_index = i;
        direction = 1.0;
      }
      if (b.lo - v(i) > worst_violation) {
        worst_violation = b.lo - v(i);
        worst_index = i;
        direction = -1.0;
      }
    }
    if (worst_index >= 0) {
      const Vector g = direction * frame.basis.row(worst_index).transpose();
      if (!ellipsoid.cut(g, worst_violation)) {
        exhausted_region = true;
        break;
      }
      if (++box_cuts > 50 * options.max_oracle_calls) break;
      continue;
    }

    const double f = max_block_eigenvalue(problem, v, &g_full);
    ++calls;
    if (f < best) {
      best = f;
      best_v = v;
    }
    const Vector g = frame.basis.transpose() * g_full;
    const double width = ellipsoid.width(g);
    lower = std::max(lower, f - width);

    if (lower > -problem.margin) break;
    if (best <= -problem.margin && best - lower <= options.gap_rel * std::abs(best)) break;
    if (width == 0.0) break;

    if (!ellipsoid.cut(g, f - best)) {
      exhausted_region = true;
      break;
    }
  }
  if (exhausted_region && std::isfinite(best)) {
    // Every point of the domain that could beat `best` has been cut away.
    lower = std::max(lower, best);
  }

  result.v = best_v;
  result.worst_eig = best;
  result.lower_bound = lower;
  result.oracle_calls = calls;
  if (best <= -problem.margin) {
    result.status = verify(problem, best_v) ? FeasStatus::kFeasible : FeasStatus::kIndeterminate;
  } else if (lower > -problem.margin) {
    result.status = FeasStatus::kInfeasible;
  } else {
    result.status = FeasStatus::kIndeterminate;
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json block_json(const ConstraintBlock& block) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [index, m] : block.map.terms()) terms.push_back({{"var", index}, {"coefficient", matrix_json(m)}});
  return {{"name", block.name},
          {"constant", matrix_json(block.map.constant())},
          {"terms", terms},
          {"allowance", block.allowance}};
}

}  // namespace

nlohmann::json to_json(const FeasProblem& problem) {
  nlohmann::json j;
  j["num_vars"] = problem.num_vars;
  j["var_names"] = problem.var_names;
  j["margin"] = problem.margin;
  j["nsd_blocks"] = nlohmann::json::array();
  for (const auto& b : problem.nsd_blocks) j["nsd_blocks"].push_back(block_json(b));
  j["pd_blocks"] = nlohmann::json::array();
  for (const auto& b : problem.pd_blocks) j["pd_blocks"].push_back(block_json(b));
  j["nonneg"] = nlohmann::json::array();
  for (const auto& [index, floor] : problem.nonneg) j["nonneg"].push_back({{"var", index}, {"floor", floor}});
  if (problem.normalization) {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& [index, weight] : problem.normalization->weights) w.push_back({{"var", index}, {"weight", weight}});
    j["normalization"] = {{"weights", w}, {"rhs", problem.normalization->rhs}};
  }
  j["bounds"] = nlohmann::json::array();
  for (const auto& b : problem.bounds) j["bounds"].push_back({b.lo, b.hi});
  return j;
}

nlohmann::json to_json(const FeasResult& result) {
  return {{"status", to_string(result.status)},
          {"v", std::vector<double>(result.v.data(), result.v.data() + result.v.size())},
          {"worst_eig", result.worst_eig},
          {"lower_bound", result.lower_bound},
          {"oracle_calls", result.oracle_calls}};
}

}  // namespace hbreset::sdp
