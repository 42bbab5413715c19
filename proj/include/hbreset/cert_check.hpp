#pragma once

#include <cstdint>

#include "hbreset/discrete_opt.hpp"
#include "hbreset/lmi_cert.hpp"
#include "hbreset/objectives.hpp"

namespace hbreset::lmi {

/// Trajectory check of a discrete-time certificate: along the iteration
/// selected by `request`,
///   V_k = rho^{-2k} (a (phi(q_k) - phi*) + (x_k - x*)^T (P (x) I) (x_k - x*))
/// must be nonincreasing and phi(q_k) - phi* <= c rho^{2k}.
struct SoundnessReport {
  long steps = 0;
  // max_k (V_{k+1} - V_k) / V_0; must be <= 1e-8.
  double worst_increase = 0.0;
  // max_k log(gap_k / (c rho^{2k})); must be <= log(1 + 1e-6).
  double worst_log_ratio = -1e300;
  double c = 0.0;  // guarantee constant at the unscaled initial point

  bool lyapunov_ok(double slack = 1e-8) const { return worst_increase <= slack; }
  bool rate_ok(double rel = 1e-6) const;
};

/// Runs the certified method from q0 on the quadratic with Hessian
/// `model.spec().Q`. The iteration is carried out on the error coordinates
/// q - q*, where the dynamics are linear and the switching sign is scale
/// invariant, and the state is rescaled whenever its norm leaves [1e-100,
/// 1e100] so that thousands of steps at small rho neither underflow nor
/// lose precision. Logarithms of V and of the gap are tracked exactly.
SoundnessReport check_certificate(const Certificate& cert, const DtRequest& request, const QuadraticModel& model,
                                  const Vector& q0, long steps, const std::optional<Vector>& p0 = std::nullopt);

/// dopt::AlgoParams for the method a request describes. Time-invariant
/// requests use beta_hi on both branches.
dopt::AlgoParams params_for(const DtRequest& request);

}  // namespace hbreset::lmi
