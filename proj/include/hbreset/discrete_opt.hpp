#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hbreset/objectives.hpp"
#include "json.hpp"

namespace hbreset::dopt {

enum class Variant {
  kPolyak,            // gradient at q_k
  kNesterov,          // gradient at q_k + eps * beta * p_k
  kGradient,          // q_{k+1} = q_k - h grad(q_k)
  kNesterovSchedule,  // Nesterov form with the alpha-recursion momentum
};

const char* to_string(Variant v);
Variant variant_from_string(const std::string& name);

/// Two-step method configuration. beta = 1 - eps * K links the momentum
/// coefficients to the damping of the continuous-time flow: beta_hi is used
/// while momentum points downhill, beta_lo otherwise.
struct AlgoParams {
  double eps = 0.0;
  double h = 0.0;  // always eps * eps
  double beta_lo = 0.0;
  double beta_hi = 0.0;
  Variant variant = Variant::kPolyak;

  static AlgoParams from_eps(double eps, double beta_lo, double beta_hi, Variant variant);
  static AlgoParams from_h(double h, double beta_lo, double beta_hi, Variant variant);
  /// beta_hi = 1 - eps * K_lo, beta_lo = 1 - eps * K_hi.
  static AlgoParams from_damping(double h, double K_lo, double K_hi, Variant variant);

  /// Throws std::invalid_argument unless eps > 0 (>= 0 for gradient
  /// descent), h == eps^2 and 0 <= beta_lo <= beta_hi <= 1.
  void validate() const;
};

nlohmann::json to_json(const AlgoParams& params);
AlgoParams params_from_json(const nlohmann::json& j);

struct IterState {
  Vector q_prev;
  Vector q;
  Vector p;  // (q - q_prev) / eps
  long k = 0;
  double alpha = 1.0;  // only read by the schedule variant
};

/// q_prev = q0 - eps * p0 with p0 = 0 when absent.
IterState initial_state(const Vector& q0, const AlgoParams& params, const std::optional<Vector>& p0 = std::nullopt);

struct SwitchDecision {
  double beta = 0.0;
  bool is_reset = false;
};

/// beta_hi when <grad, p> < 0, beta_lo (a reset) otherwise.
SwitchDecision switching_beta(const Vector& grad, const Vector& p, const AlgoParams& params);

/// Positive root of a^2 + a * alpha_prev^2 - alpha_prev^2 = 0 and
/// beta = alpha_prev (1 - alpha_prev) / (alpha_prev^2 + alpha_next).
/// Returns (beta, alpha_next).
std::pair<double, double> nesterov_beta_schedule(double alpha_prev);

/// What a step did, for trajectory records.
struct StepInfo {
  double beta = 0.0;
  bool is_reset = false;
  double inner = 0.0;  // <grad(q_k), p_k>
  Vector grad;         // grad(q_k)
};

IterState step_pol(const IterState& state, const AlgoParams& params, const ObjectiveModel& model,
                   StepInfo* info = nullptr);
IterState step_nes(const IterState& state, const AlgoParams& params, const ObjectiveModel& model,
                   StepInfo* info = nullptr);
IterState step_gd(const IterState& state, const AlgoParams& params, const ObjectiveModel& model,
                  StepInfo* info = nullptr);
/// Dispatches on params.variant.
IterState step(const IterState& state, const AlgoParams& params, const ObjectiveModel& model,
               StepInfo* info = nullptr);

struct IterRecord {
  long k = 0;
  double phi_gap = 0.0;  // NaN when phi* is unknown
  int inner_sign = 0;    // sign of <grad(q_k), p_k>
  double beta = 0.0;     // momentum applied from q_k (0 for gradient descent)
  bool reset = false;
  double grad_norm = 0.0;
};

enum class RunStatus { kMaxIter, kConverged, kDiverged };
const char* to_string(RunStatus status);

struct Trajectory {
  std::vector<IterRecord> records;  // iterations executed + 1
  RunStatus status = RunStatus::kMaxIter;
  IterState final_state;
  long iterations() const { return static_cast<long>(records.size()) - 1; }
};

struct RunOptions {
  long max_iter = 1000;
  double grad_tol = 0.0;
  std::optional<Vector> p0;
  // Called with every state, including the initial one.
  std::function<void(const IterState&)> observer;
};

/// Iterates until max_iter steps or |grad(q_k)| <= grad_tol. Stops with
/// kDiverged once phi(q_k) is non-finite or exceeds 1e12 * max(1, |phi(q0)|).
Trajectory run(const ObjectiveModel& model, const AlgoParams& params, const Vector& q0, const RunOptions& options);

/// Number of k with phi(q_{k+1}) > phi(q_k). Throws std::logic_error when the
/// gaps were not recorded.
long count_nonmonotone(const Trajectory& traj);

/// Columns k, phi_gap, inner_sign, beta, reset, grad_norm.
void write_csv(const Trajectory& traj, std::ostream& out);

}  // namespace hbreset::dopt
