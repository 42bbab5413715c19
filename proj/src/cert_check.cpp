#include "hbreset/cert_check.hpp"

#include <cmath>
#include <stdexcept>

namespace hbreset::lmi {

bool SoundnessReport::rate_ok(double rel) const { return worst_log_ratio <= std::log1p(rel); }

dopt::AlgoParams params_for(const DtRequest& request) {
  const dopt::Variant variant =
      request.discretization == Discretization::kPolyak ? dopt::Variant::kPolyak : dopt::Variant::kNesterov;
  const double lo = request.switched ? request.beta_lo : request.beta_hi;
  return dopt::AlgoParams::from_h(request.h, lo, request.beta_hi, variant);
}

namespace {

// Multiplies the state by 2^shift; exact in binary floating point.
void rescale(dopt::IterState& s, int shift) {
  for (Vector* v : {&s.q_prev, &s.q, &s.p})
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = std::ldexp((*v)(i), shift);
}

}  // namespace

SoundnessReport check_certificate(const Certificate& cert, const DtRequest& request, const QuadraticModel& model,
                                  const Vector& q0, long steps, const std::optional<Vector>& p0) {
  if (cert.rate_kind != "rho") throw std::invalid_argument("trajectory check needs a discrete-time certificate");
  const auto a_it = cert.multipliers.find("a");
  if (a_it == cert.multipliers.end() || !(a_it->second > 0.0)) throw std::invalid_argument("certificate lacks a > 0");
  const double a = a_it->second;
  const double rho = cert.rate;

  const int n = model.dim();
  const QuadraticModel error_model(QuadraticSpec{model.spec().Q, Vector::Zero(n)});
  const dopt::AlgoParams params = params_for(request);
  dopt::IterState state = dopt::initial_state(q0 - *model.minimizer(), params, p0);

  auto lyapunov_core = [&](const dopt::IterState& s) {
    Vector x(2 * n);
    x << s.q_prev, s.q;
    return a * error_model.gap(s.q) + cert.quadratic_part(x);
  };

  SoundnessReport report;
  double log_scale = 0.0;  // true state = stored state * 2^log2_scale
  int log2_scale = 0;
  const double log_rho2 = 2.0 * std::log(rho);
  const double v0 = lyapunov_core(state);
  if (!(v0 > 0.0)) return report;  // started at the minimizer
  report.c = v0 / a;
  const double log_v0 = std::log(v0);
  const double log_c = std::log(report.c);

  double prev_ratio = 1.0;  // V_k / V_0
  for (long k = 0; k <= steps; ++k) {
    const double core = lyapunov_core(state);
    const double gap = error_model.gap(state.q);
    if (core == 0.0) break;  // reached the minimizer exactly
    log_scale = log2_scale * std::log(2.0);
    const double log_v = std::log(core) + 2.0 * log_scale - k * log_rho2;
    const double ratio = std::exp(log_v - log_v0);
    if (k > 0) report.worst_increase = std::max(report.worst_increase, ratio - prev_ratio);
    prev_ratio = ratio;
    if (gap > 0.0) {
      const double log_ratio = std::log(gap) + 2.0 * log_scale - (log_c + k * log_rho2);
      report.worst_log_ratio = std::max(report.worst_log_ratio, log_ratio);
    }
    report.steps = k;
    if (k == steps) break;
    state = dopt::step(state, params, error_model);
    const double norm = std::max(state.q.lpNorm<Eigen::Infinity>(), state.q_prev.lpNorm<Eigen::Infinity>());
    if (norm > 0.0 && (norm < 1e-100 || norm > 1e100)) {
      const int shift = -std::ilogb(norm);
      rescale(state, shift);
      log2_scale -= shift;
    }
  }
  return report;
}

}  // namespace hbreset::lmi
