#pragma once

#include <ostream>
#include <vector>

#include "hbreset/objectives.hpp"
#include "json.hpp"

namespace hbreset::hct {

struct HybridState {
  Vector q;
  Vector p;
  double tau = 0.0;  // time since the last jump
};

struct HybridParams {
  double K = 1.0;      // damping of HB(K) and HHB(K)
  double K_lo = 0.0;   // HiHB damping while <grad, p> < 0
  double K_hi = 1.0;   // HiHB damping otherwise
  double T_min = 1e-3; // dwell time between jumps
  double step = 1e-3;  // RK4 step
  double event_tol = 1e-10;

  /// Throws std::invalid_argument on nonpositive dwell time, step or
  /// tolerance, negative K, or K_lo > K_hi.
  void validate() const;
};

/// 1e-3 / sqrt(L): a thousandth of the shortest oscillation time scale.
double default_dwell_time(double lipschitz);

enum class FlowMode { kHB, kHHB };

struct Derivative {
  Vector dq;
  Vector dp;
  double dtau = 0.0;  // 1 for HHB, 0 for HB
};

/// (p, -K p - grad(q), 1).
Derivative flow_map(const HybridState& z, const HybridParams& params, const ObjectiveModel& model, FlowMode mode);

/// tau <= T_min, or <grad(q), p> <= 0 with tau >= T_min.
bool in_flow_set(const HybridState& z, const HybridParams& params, const ObjectiveModel& model);
/// <grad(q), p> >= 0 and tau >= T_min.
bool in_jump_set(const HybridState& z, const HybridParams& params, const ObjectiveModel& model);

/// (q, 0, 0).
HybridState jump_map(const HybridState& z);

/// K_hi when <grad(q), p> > 0 or |<grad(q), p>| <= event_tol, K_lo otherwise.
double kappa_select(const HybridState& z, const HybridParams& params, const ObjectiveModel& model);

/// phi(q) + |p|^2 / 2.
double energy(const HybridState& z, const ObjectiveModel& model);

struct ArcSample {
  double t = 0.0;
  long j = 0;
  HybridState z;
  double energy = 0.0;
};

struct JumpRecord {
  double t = 0.0;
  long j = 0;  // jump count after the jump
  Vector q;
};

enum class ArcStatus { kReachedEnd, kConverged };

struct HybridArc {
  std::vector<ArcSample> samples;  // a jump contributes a sample before and after
  std::vector<JumpRecord> jumps;
  ArcStatus status = ArcStatus::kReachedEnd;
};

/// HB(K) flow with RK4 steps of params.step.
HybridArc integrate_hb(const ObjectiveModel& model, const HybridParams& params, const HybridState& x0, double t_end);

/// HHB(K): RK4 flow; once tau >= T_min the sign of <grad(q), p> is watched
/// and a crossing into the jump set is located by bisection on the step
/// length until the inner product is within event_tol of zero. The step that
/// carries tau past T_min is shortened to land on T_min exactly. Stops at
/// t_end or once |grad(q)| <= 1e-10. Throws std::runtime_error when the
/// bisection needs more than 100 halvings.
HybridArc integrate_hhb(const ObjectiveModel& model, const HybridParams& params, const HybridState& z0, double t_end);

/// HiHB(K_lo, K_hi) with kappa re-selected at every RK4 stage; j stays 0.
HybridArc integrate_hihb(const ObjectiveModel& model, const HybridParams& params, const HybridState& x0,
                         double t_end);

/// Columns t, j, q1..qn, p1..pn, tau, energy.
void write_csv(const HybridArc& arc, std::ostream& out);
/// [{"t": ..., "j": ..., "q": [...]}, ...]
nlohmann::json jumps_to_json(const HybridArc& arc);

}  // namespace hbreset::hct
