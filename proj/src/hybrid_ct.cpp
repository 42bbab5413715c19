#include "hbreset/hybrid_ct.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "hbreset/format.hpp"

namespace hbreset::hct {

void HybridParams::validate() const {
  if (!(T_min > 0.0)) throw std::invalid_argument("dwell time must be positive");
  if (!(step > 0.0)) throw std::invalid_argument("integrator step must be positive");
  if (!(event_tol > 0.0)) throw std::invalid_argument("event tolerance must be positive");
  if (K < 0.0 || K_lo < 0.0) throw std::invalid_argument("damping must be nonnegative");
  if (K_lo > K_hi) throw std::invalid_argument("need K_lo <= K_hi");
}

double default_dwell_time(double lipschitz) {
  if (!(lipschitz > 0.0)) throw std::invalid_argument("Lipschitz constant must be positive");
  return 1e-3 / std::sqrt(lipschitz);
}

namespace {

Vector checked_gradient(const ObjectiveModel& model, const Vector& q) {
  Vector g = model.gradient(q);
  if (!g.allFinite()) throw std::runtime_error("non-finite gradient");
  return g;
}

double inner(const HybridState& z, const ObjectiveModel& model) { return checked_gradient(model, z.q).dot(z.p); }

using Damping = std::function<double(const Vector& q, const Vector& p)>;

// One classical RK4 step of q' = p, p' = -kappa(q, p) p - grad(q).
HybridState rk4(const HybridState& z, double dt, const ObjectiveModel& model, const Damping& kappa) {
  auto accel = [&](const Vector& q, const Vector& p) -> Vector {
    return -kappa(q, p) * p - checked_gradient(model, q);
  };
  const Vector& q = z.q;
  const Vector& p = z.p;
  const Vector k1q = p, k1p = accel(q, p);
  const Vector q2 = q + 0.5 * dt * k1q, p2 = p + 0.5 * dt * k1p;
  const Vector k2q = p2, k2p = accel(q2, p2);
  const Vector q3 = q + 0.5 * dt * k2q, p3 = p + 0.5 * dt * k2p;
  const Vector k3q = p3, k3p = accel(q3, p3);
  const Vector q4 = q + dt * k3q, p4 = p + dt * k3p;
  const Vector k4q = p4, k4p = accel(q4, p4);
  HybridState out;
  out.q = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  out.p = p + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  out.tau = z.tau + dt;
  return out;
}

void push(HybridArc& arc, double t, long j, const HybridState& z, const ObjectiveModel& model) {
  arc.samples.push_back({t, j, z, energy(z, model)});
}

bool converged(const HybridState& z, const ObjectiveModel& model) {
  return checked_gradient(model, z.q).norm() <= 1e-10;
}

void check_start(const ObjectiveModel& model, const HybridState& z, double t_end) {
  if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
  if (z.q.size() != model.dim() || z.p.size() != model.dim()) throw std::invalid_argument("state dimension mismatch");
  if (z.tau < 0.0) throw std::invalid_argument("timer must be nonnegative");
}

// Fixed-step flow without jumps (HB and HiHB).
HybridArc integrate_smooth(const ObjectiveModel& model, const HybridParams& params, const HybridState& x0,
                           double t_end, const Damping& kappa) {
  params.validate();
  check_start(model, x0, t_end);
  HybridArc arc;
  HybridState z = x0;
  z.tau = 0.0;
  double t = 0.0;
  push(arc, t, 0, z, model);
  for (long i = 1; t < t_end; ++i) {
    if (converged(z, model)) {
      arc.status = ArcStatus::kConverged;
      return arc;
    }
    const double next_t = std::min(t_end, i * params.step);
    z = rk4(z, next_t - t, model, kappa);
    z.tau = 0.0;
    t = next_t;
    push(arc, t, 0, z, model);
  }
  return arc;
}

}  // namespace

Derivative flow_map(const HybridState& z, const HybridParams& params, const ObjectiveModel& model, FlowMode mode) {
  Derivative d;
  d.dq = z.p;
  d.dp = -params.K * z.p - checked_gradient(model, z.q);
  d.dtau = mode == FlowMode::kHHB ? 1.0 : 0.0;
  return d;
}

bool in_flow_set(const HybridState& z, const HybridParams& params, const ObjectiveModel& model) {
  if (z.tau <= params.T_min) return true;
  return inner(z, model) <= 0.0;
}

bool in_jump_set(const HybridState& z, const HybridParams& params, const ObjectiveModel& model) {
  return z.tau >= params.T_min && inner(z, model) >= 0.0;
}

HybridState jump_map(const HybridState& z) { return {z.q, Vector::Zero(z.p.size()), 0.0}; }

double kappa_select(const HybridState& z, const HybridParams& params, const ObjectiveModel& model) {
  const double g = inner(z, model);
  return (g > 0.0 || std::abs(g) <= params.event_tol) ? params.K_hi : params.K_lo;
}

double energy(const HybridState& z, const ObjectiveModel& model) { return model.value(z.q) + 0.5 * z.p.squaredNorm(); }

HybridArc integrate_hb(const ObjectiveModel& model, const HybridParams& params, const HybridState& x0, double t_end) {
  const double K = params.K;
  return integrate_smooth(model, params, x0, t_end, [K](const Vector&, const Vector&) { return K; });
}

HybridArc integrate_hihb(const ObjectiveModel& model, const HybridParams& params, const HybridState& x0,
                         double t_end) {
  return integrate_smooth(model, params, x0, t_end, [&](const Vector& q, const Vector& p) {
    return kappa_select({q, p, 0.0}, params, model);
  });
}

HybridArc integrate_hhb(const ObjectiveModel& model, const HybridParams& params, const HybridState& z0, double t_end) {
  params.validate();
  check_start(model, z0, t_end);
  const double K = params.K;
  const Damping damping = [K](const Vector&, const Vector&) { return K; };

  HybridArc arc;
  HybridState z = z0;
  double t = 0.0;
  long j = 0;
  push(arc, t, j, z, model);

  auto jump_now = [&]() {
    z = jump_map(z);
    ++j;
    arc.jumps.push_back({t, j, z.q});
    push(arc, t, j, z, model);
  };

  while (t < t_end) {
    if (converged(z, model)) {
      arc.status = ArcStatus::kConverged;
      return arc;
    }
    if (!in_flow_set(z, params, model) || (z.tau >= params.T_min && inner(z, model) > params.event_tol)) {
      jump_now();
      continue;
    }
    double dt = std::min(params.step, t_end - t);
    if (z.tau < params.T_min && z.tau + dt > params.T_min) dt = params.T_min - z.tau;
    const bool watching = z.tau >= params.T_min;
    HybridState next = rk4(z, dt, model, damping);

    if (watching && inner(next, model) > params.event_tol) {
      // The switching function crossed zero inside the step.
      double lo = 0.0, hi = dt;
      HybridState at_hi = next;
      for (int it = 0;; ++it) {
        if (it >= 100) throw std::runtime_error("event localization did not converge");
        const double mid = 0.5 * (lo + hi);
        HybridState trial = rk4(z, mid, model, damping);
        const double g = inner(trial, model);
        if (g > params.event_tol) {
          hi = mid;
          at_hi = std::move(trial);
        } else if (g < 0.0) {
          lo = mid;
        } else {
          hi = mid;
          at_hi = std::move(trial);
          break;
        }
      }
      z = std::move(at_hi);
      t += hi;
      push(arc, t, j, z, model);
      jump_now();
      continue;
    }
    z = std::move(next);
    t = (dt == t_end - t) ? t_end : t + dt;
    push(arc, t, j, z, model);
  }
  return arc;
}

void write_csv(const HybridArc& arc, std::ostream& out) {
  const auto n = arc.samples.empty() ? 0 : arc.samples.front().z.q.size();
  out << "t,j";
  for (Eigen::Index i = 0; i < n; ++i) out << ",q" << i + 1;
  for (Eigen::Index i = 0; i < n; ++i) out << ",p" << i + 1;
  out << ",tau,energy\n";
  for (const auto& s : arc.samples) {
    out << fmt17(s.t) << ',' << s.j;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << fmt17(s.z.q(i));
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << fmt17(s.z.p(i));
    out << ',' << fmt17(s.z.tau) << ',' << fmt17(s.energy) << '\n';
  }
}

nlohmann::json jumps_to_json(const HybridArc& arc) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& jr : arc.jumps) {
    out.push_back({{"t", jr.t}, {"j", jr.j}, {"q", std::vector<double>(jr.q.data(), jr.q.data() + jr.q.size())}});
  }
  return out;
}

}  // namespace hbreset::hct
