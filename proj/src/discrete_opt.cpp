#include "hbreset/discrete_opt.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "hbreset/format.hpp"

namespace hbreset::dopt {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kPolyak: return "POL";
    case Variant::kNesterov: return "NES";
    case Variant::kGradient: return "GD";
    case Variant::kNesterovSchedule: return "NES_SCHEDULE";
  }
  return "?";
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : {Variant::kPolyak, Variant::kNesterov, Variant::kGradient, Variant::kNesterovSchedule}) {
    if (name == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown variant '" + name + "'");
}

AlgoParams AlgoParams::from_eps(double eps, double beta_lo, double beta_hi, Variant variant) {
  AlgoParams p;
  p.eps = eps;
  p.h = eps * eps;
  p.beta_lo = beta_lo;
  p.beta_hi = beta_hi;
  p.variant = variant;
  p.validate();
  return p;
}

AlgoParams AlgoParams::from_h(double h, double beta_lo, double beta_hi, Variant variant) {
  if (h < 0.0) throw std::invalid_argument("stepsize must be nonnegative");
  return from_eps(std::sqrt(h), beta_lo, beta_hi, variant);
}

AlgoParams AlgoParams::from_damping(double h, double K_lo, double K_hi, Variant variant) {
  if (h < 0.0) throw std::invalid_argument("stepsize must be nonnegative");
  const double eps = std::sqrt(h);
  return from_eps(eps, 1.0 - eps * K_hi, 1.0 - eps * K_lo, variant);
}

void AlgoParams::validate() const {
  if (!std::isfinite(eps) || eps < 0.0 || (eps == 0.0 && variant != Variant::kGradient)) {
    throw std::invalid_argument("eps must be positive");
  }
  if (h != eps * eps) throw std::invalid_argument("h must equal eps^2");
  if (variant == Variant::kGradient || variant == Variant::kNesterovSchedule) return;
  if (!(0.0 <= beta_lo && beta_lo <= beta_hi && beta_hi <= 1.0)) {
    throw std::invalid_argument("need 0 <= beta_lo <= beta_hi <= 1");
  }
}

nlohmann::json to_json(const AlgoParams& p) {
  return {{"eps", p.eps}, {"h", p.h}, {"beta_lo", p.beta_lo}, {"beta_hi", p.beta_hi}, {"variant", to_string(p.variant)}};
}

AlgoParams params_from_json(const nlohmann::json& j) {
  AlgoParams p;
  p.eps = j.at("eps").get<double>();
  p.h = j.at("h").get<double>();
  p.beta_lo = j.value("beta_lo", 0.0);
  p.beta_hi = j.value("beta_hi", 0.0);
  p.variant = variant_from_string(j.at("variant").get<std::string>());
  p.validate();
  return p;
}

IterState initial_state(const Vector& q0, const AlgoParams& params, const std::optional<Vector>& p0) {
  IterState s;
  s.q = q0;
  s.p = p0 ? *p0 : Vector::Zero(q0.size());
  if (s.p.size() != q0.size()) throw std::invalid_argument("p0 dimension mismatch");
  s.q_prev = q0 - params.eps * s.p;
  return s;
}

SwitchDecision switching_beta(const Vector& grad, const Vector& p, const AlgoParams& params) {
  if (grad.dot(p) < 0.0) return {params.beta_hi, false};
  return {params.beta_lo, true};
}

std::pair<double, double> nesterov_beta_schedule(double alpha_prev) {
  if (!(alpha_prev > 0.0 && alpha_prev <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const double a2 = alpha_prev * alpha_prev;
  // Positive root of x^2 + a2 x - a2, written to avoid cancellation.
  const double alpha_next = 2.0 * a2 / (a2 + std::sqrt(a2 * a2 + 4.0 * a2));
  const double beta = alpha_prev * (1.0 - alpha_prev) / (a2 + alpha_next);
  return {beta, alpha_next};
}

namespace {

Vector checked_gradient(const ObjectiveModel& model, const Vector& q) {
  Vector g = model.gradient(q);
  if (!g.allFinite()) throw std::runtime_error("non-finite gradient");
  return g;
}

IterState advance(const IterState& state, const Vector& q_next, double eps) {
  IterState next;
  next.q_prev = state.q;
  next.q = q_next;
  next.p = eps > 0.0 ? Vector((q_next - state.q) / eps) : Vector::Zero(q_next.size());
  next.k = state.k + 1;
  next.alpha = state.alpha;
  return next;
}

void fill(StepInfo* info, double beta, bool reset, const Vector& grad, const Vector& p) {
  if (!info) return;
  info->beta = beta;
  info->is_reset = reset;
  info->inner = grad.dot(p);
  info->grad = grad;
}

}  // namespace

IterState step_pol(const IterState& state, const AlgoParams& params, const ObjectiveModel& model, StepInfo* info) {
  if (params.variant != Variant::kPolyak) throw std::invalid_argument("step_pol needs the POL variant");
  const Vector g = checked_gradient(model, state.q);
  const SwitchDecision d = switching_beta(g, state.p, params);
  fill(info, d.beta, d.is_reset, g, state.p);
  const double eps = params.eps;
  return advance(state, state.q + (eps * d.beta) * state.p - params.h * g, eps);
}

IterState step_nes(const IterState& state, const AlgoParams& params, const ObjectiveModel& model, StepInfo* info) {
  const double eps = params.eps;
  double beta = 0.0;
  bool reset = false;
  double alpha_next = state.alpha;
  Vector g;
  if (params.variant == Variant::kNesterov) {
    g = checked_gradient(model, state.q);
    const SwitchDecision d = switching_beta(g, state.p, params);
    beta = d.beta;
    reset = d.is_reset;
  } else if (params.variant == Variant::kNesterovSchedule) {
    std::tie(beta, alpha_next) = nesterov_beta_schedule(state.alpha);
    if (info) g = checked_gradient(model, state.q);
  } else {
    throw std::invalid_argument("step_nes needs the NES or NES_SCHEDULE variant");
  }
  if (info) fill(info, beta, reset, g, state.p);
  const Vector g_ext = checked_gradient(model, state.q + (eps * beta) * state.p);
  IterState next = advance(state, state.q + (eps * beta) * state.p - params.h * g_ext, eps);
  next.alpha = alpha_next;
  return next;
}

IterState step_gd(const IterState& state, const AlgoParams& params, const ObjectiveModel& model, StepInfo* info) {
  if (params.variant != Variant::kGradient) throw std::invalid_argument("step_gd needs the GD variant");
  const Vector g = checked_gradient(model, state.q);
  fill(info, 0.0, false, g, state.p);
  return advance(state, state.q - params.h * g, params.eps);
}

IterState step(const IterState& state, const AlgoParams& params, const ObjectiveModel& model, StepInfo* info) {
  switch (params.variant) {
    case Variant::kPolyak: return step_pol(state, params, model, info);
    case Variant::kNesterov:
    case Variant::kNesterovSchedule: return step_nes(state, params, model, info);
    case Variant::kGradient: return step_gd(state, params, model, info);
  }
  throw std::logic_error("unreachable");
}

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kMaxIter: return "max_iter";
    case RunStatus::kConverged: return "converged";
    case RunStatus::kDiverged: return "diverged";
  }
  return "?";
}

Trajectory run(const ObjectiveModel& model, const AlgoParams& params, const Vector& q0, const RunOptions& options) {
  if (options.max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  params.validate();
  const bool have_gap = model.min_value().has_value();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double limit = 1e12 * std::max(1.0, std::abs(model.value(q0)));

  Trajectory traj;
  IterState state = initial_state(q0, params, options.p0);
  traj.records.reserve(static_cast<std::size_t>(std::min<long>(options.max_iter, 1000000) + 1));
  for (;;) {
    if (options.observer) options.observer(state);
    const double value = model.value(state.q);
    IterRecord rec;
    rec.k = state.k;
    rec.phi_gap = have_gap ? model.gap(state.q) : nan;
    if (!std::isfinite(value) || std::abs(value) > limit) {
      traj.records.push_back(rec);
      traj.status = RunStatus::kDiverged;
      break;
    }
    const bool last = state.k >= options.max_iter;
    StepInfo info;
    IterState next;
    if (last) {
      info.grad = model.gradient(state.q);
      info.inner = info.grad.dot(state.p);
    } else {
      next = step(state, params, model, &info);
    }
    rec.inner_sign = (info.inner > 0.0) - (info.inner < 0.0);
    rec.beta = info.beta;
    rec.reset = info.is_reset;
    rec.grad_norm = info.grad.norm();
    if (last) {
      if (params.variant == Variant::kPolyak || params.variant == Variant::kNesterov) {
        const SwitchDecision d = switching_beta(info.grad, state.p, params);
        rec.beta = d.beta;
        rec.reset = d.is_reset;
      }
      traj.records.push_back(rec);
      traj.status = rec.grad_norm <= options.grad_tol ? RunStatus::kConverged : RunStatus::kMaxIter;
      break;
    }
    if (rec.grad_norm <= options.grad_tol) {
      traj.records.push_back(rec);
      traj.status = RunStatus::kConverged;
      break;
    }
    traj.records.push_back(rec);
    state = std::move(next);
  }
  traj.final_state = state;
  return traj;
}

long count_nonmonotone(const Trajectory& traj) {
  long count = 0;
  for (std::size_t k = 0; k < traj.records.size(); ++k) {
    if (std::isnan(traj.records[k].phi_gap)) throw std::logic_error("trajectory has no recorded gaps");
    if (k + 1 < traj.records.size() && traj.records[k + 1].phi_gap > traj.records[k].phi_gap) ++count;
  }
  return count;
}

void write_csv(const Trajectory& traj, std::ostream& out) {
  out << "k,phi_gap,inner_sign,beta,reset,grad_norm\n";
  for (const auto& r : traj.records) {
    out << r.k << ',' << fmt17(r.phi_gap) << ',' << r.inner_sign << ',' << fmt17(r.beta) << ',' << (r.reset ? 1 : 0)
        << ',' << fmt17(r.grad_norm) << '\n';
  }
}

}  // namespace hbreset::dopt
