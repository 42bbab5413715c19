#include "hbreset/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hbreset/format.hpp"
#include "hbreset/rng.hpp"
#include "hbreset/svg.hpp"

namespace hbreset::exp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool contains(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool nesterov_family(const std::string& method) { return method.find("nes") != std::string::npos; }

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(TuningRule rule) { return rule == TuningRule::kMisTuned ? "mistuned" : "optimal"; }

TuningRule tuning_rule_from_string(const std::string& name) {
  if (name == "mistuned") return TuningRule::kMisTuned;
  if (name == "optimal") return TuningRule::kOptimal;
  throw std::invalid_argument("unknown tuning rule '" + name + "'");
}

const std::vector<std::string>& certify_methods() {
  static const std::vector<std::string> names = {"nesterov", "hhb-nes", "hihb-nes", "polyak", "hhb-pol", "hihb-pol"};
  return names;
}

lmi::DtRequest certify_request(const std::string& method, double mu, double L, TuningRule rule) {
  if (!contains(certify_methods(), method)) throw std::invalid_argument("unknown method '" + method + "'");
  if (!(mu > 0.0) || mu > L) throw std::invalid_argument("need 0 < mu <= L");
  const bool nes = nesterov_family(method);
  lmi::DtRequest r;
  r.discretization = nes ? lmi::Discretization::kNesterov : lmi::Discretization::kPolyak;
  r.mu = mu;
  r.lipschitz = L;
  const double sL = std::sqrt(L), sm = std::sqrt(mu);
  if (rule == TuningRule::kMisTuned) {
    r.h = 1.0 / (2.0 * L);
    r.beta_hi = 1.0 - 0.1 * std::sqrt(r.h);
  } else if (nes) {
    r.h = 1.0 / L;
    r.beta_hi = (sL - sm) / (sL + sm);
  } else {
    r.h = 4.0 / ((sL + sm) * (sL + sm));
    r.beta_hi = std::pow((sL - sm) / (sL + sm), 2);
  }
  if (method.rfind("hhb", 0) == 0) {
    r.beta_lo = 0.0;
  } else if (method.rfind("hihb", 0) == 0) {
    r.beta_lo = std::min(1.0 - std::sqrt(r.h), r.beta_hi);
  } else {
    r.beta_lo = r.beta_hi;
    r.switched = false;
  }
  return r;
}

std::vector<SweepRow> certify_sweep(const std::vector<double>& grid_L, const std::vector<std::string>& methods,
                                    TuningRule rule, double mu, const lmi::CertOptions& options) {
  if (grid_L.empty() || methods.empty()) throw std::invalid_argument("sweep grid must be non-empty");
  std::vector<SweepRow> rows;
  for (double L : grid_L) {
    for (const auto& method : methods) {
      SweepRow row;
      row.request = certify_request(method, mu, L, rule);
      row.L = L;
      row.mu = mu;
      row.h = row.request.h;
      row.beta_hi = row.request.beta_hi;
      row.beta_lo = row.request.beta_lo;
      row.method = method;
      const lmi::BisectResult res = lmi::certify_dt(row.request, options);
      row.rho = res.rate;
      row.monotone = res.monotone;
      row.certificate = res.certificate;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "L,mu,h,beta_hi,beta_lo,method,rho\n";
  for (const auto& r : rows) {
    out << fmt17(r.L) << ',' << fmt17(r.mu) << ',' << fmt17(r.h) << ',' << fmt17(r.beta_hi) << ','
        << fmt17(r.beta_lo) << ',' << r.method << ',' << (r.rho ? fmt17(*r.rho) : "uncertified") << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "L,mu,h,beta_hi,beta_lo,method,rho") {
    throw std::invalid_argument("not a sweep CSV");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 7) throw std::invalid_argument("sweep CSV row needs 7 cells");
    SweepRow r;
    r.L = std::stod(cells[0]);
    r.mu = std::stod(cells[1]);
    r.h = std::stod(cells[2]);
    r.beta_hi = std::stod(cells[3]);
    r.beta_lo = std::stod(cells[4]);
    r.method = cells[5];
    if (cells[6] != "uncertified") r.rho = std::stod(cells[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string sweep_svg(const std::vector<SweepRow>& rows, const std::string& title) {
  std::vector<svg::Series> series;
  for (const auto& r : rows) {
    auto it = std::find_if(series.begin(), series.end(), [&](const svg::Series& s) { return s.name == r.method; });
    if (it == series.end()) {
      series.push_back({r.method, {}, {}});
      it = series.end() - 1;
    }
    it->x.push_back(r.L);
    it->y.push_back(r.rho ? *r.rho : std::numeric_limits<double>::quiet_NaN());
  }
  return svg::line_chart(series, {title, "L", "rho", false});
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& quad_methods() {
  static const std::vector<std::string> names = {"polyak", "nesterov", "hhb-pol", "hhb-nes", "hihb-pol", "hihb-nes"};
  return names;
}

dopt::AlgoParams quad_params(const std::string& method, double h, double K, double K_hi) {
  if (!contains(quad_methods(), method)) throw std::invalid_argument("unknown method '" + method + "'");
  const dopt::Variant v = nesterov_family(method) ? dopt::Variant::kNesterov : dopt::Variant::kPolyak;
  const double eps = std::sqrt(h);
  const double beta_hi = 1.0 - eps * K;
  double beta_lo = beta_hi;
  if (method.rfind("hhb", 0) == 0) beta_lo = 0.0;
  if (method.rfind("hihb", 0) == 0) beta_lo = std::min(beta_hi, std::max(0.0, 1.0 - eps * K_hi));
  return dopt::AlgoParams::from_eps(eps, beta_lo, beta_hi, v);
}

nlohmann::json to_json(const QuadConfig& c) {
  return {{"n", c.n},       {"L", c.L}, {"h", c.h}, {"iters", c.iters}, {"K", c.K}, {"hihb_K_hi", c.hihb_K_hi},
          {"methods", c.methods}, {"seed", c.seed}};
}

const QuadRun& QuadExperiment::find(const std::string& method, double K) const {
  for (const auto& r : runs)
    if (r.method == method && r.K == K) return r;
  throw std::out_of_range("no run for " + method);
}

double tail_slope(const dopt::Trajectory& traj, double fraction) {
  const std::size_t n = traj.records.size();
  const std::size_t start = n - static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long count = 0;
  for (std::size_t k = start; k < n; ++k) {
    const double gap = traj.records[k].phi_gap;
    if (!(gap > 0.0)) continue;
    const double x = static_cast<double>(traj.records[k].k);
    const double y = std::log(gap);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) return std::numeric_limits<double>::quiet_NaN();
  return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

Vector quad_initial_point(int n, std::uint64_t seed) {
  Xoshiro256 rng(seed * 7919 + 1);
  Vector q0(n);
  for (int i = 0; i < n; ++i) q0(i) = rng.uniform(-100.0, 100.0);
  return q0;
}

QuadExperiment run_quad(const QuadConfig& config) {
  if (config.K.empty() || config.methods.empty()) throw std::invalid_argument("quad grid must be non-empty");
  QuadExperiment ex;
  ex.model = gen_random_quadratic(config.n, config.L, config.seed);
  ex.q0 = quad_initial_point(config.n, config.seed);

  const QuadraticModel centered(QuadraticSpec{ex.model->spec().Q, Vector::Zero(config.n)});
  const Vector e0 = ex.q0 - *ex.model->minimizer();
  for (double K : config.K) {
    for (const auto& method : config.methods) {
      QuadRun r;
      r.method = method;
      r.K = K;
      r.params = quad_params(method, config.h, K, std::max(K, config.hihb_K_hi));
      dopt::RunOptions opts;
      opts.max_iter = config.iters;
      r.traj = dopt::run(centered, r.params, e0, opts);
      r.nonmonotone = dopt::count_nonmonotone(r.traj);
      r.final_gap = r.traj.records.back().phi_gap;
      r.tail_slope = tail_slope(r.traj);
      ex.runs.push_back(std::move(r));
    }
  }
  return ex;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& tune_methods() {
  static const std::vector<std::string> names = {"gd", "polyak", "nesterov", "hhb", "hihb"};
  return names;
}

nlohmann::json to_json(const TuneConfig& c) {
  return {{"budget", c.budget},
          {"h_lo_factor", c.h_lo_factor},
          {"h_hi_factor", c.h_hi_factor},
          {"scan_points", c.scan_points},
          {"outer_iters", c.outer_iters},
          {"inner_iters", c.inner_iters}};
}

nlohmann::json to_json(const TuneResult& r) {
  return {{"method", r.method},
          {"params", dopt::to_json(r.params)},
          {"gap", r.gap},
          {"budget", r.budget},
          {"evaluations", r.evaluations}};
}

dopt::AlgoParams tune_params(const std::string& method, double h, double beta) {
  using dopt::AlgoParams;
  using dopt::Variant;
  if (method == "gd") return AlgoParams::from_h(h, 0.0, 0.0, Variant::kGradient);
  if (method == "polyak") return AlgoParams::from_h(h, beta, beta, Variant::kPolyak);
  if (method == "nesterov") return AlgoParams::from_h(h, 0.0, 0.0, Variant::kNesterovSchedule);
  if (method == "hhb") return AlgoParams::from_h(h, 0.0, beta, Variant::kPolyak);
  if (method == "hihb") return AlgoParams::from_h(h, beta, 1.0, Variant::kPolyak);
  throw std::invalid_argument("unknown method '" + method + "'");
}

namespace {

struct Best {
  double x = 0.0;
  double f = kInf;
  double aux = 0.0;
};

// Coarse scan of `scan` evenly spaced points on [lo, hi], then bisection on
// the sign of f(m + d) - f(m - d), d = width / 100, inside the bracket around
// the best scan point. Ties between two divergent probes move toward
// `safe_high` (or the low end).
template <class F>
Best bisect_min(F&& f, double lo, double hi, int scan, int iters, bool safe_high) {
  Best best;
  bool any = false;
  auto probe = [&](double x) {
    double aux = 0.0;
    const double v = f(x, aux);
    if (!any || v < best.f) best = {x, v, aux};
    any = true;
    return v;
  };
  if (scan >= 2) {
    const double step = (hi - lo) / (scan - 1);
    for (int i = 0; i < scan; ++i) probe(lo + step * i);
    const double center = best.x;
    lo = std::max(lo, center - step);
    hi = std::min(hi, center + step);
  }
  for (int it = 0; it < iters; ++it) {
    const double m = 0.5 * (lo + hi);
    const double d = 0.01 * (hi - lo);
    const double fl = probe(m - d);
    const double fr = probe(m + d);
    if (fl < fr) {
      hi = m;
    } else if (fr < fl) {
      lo = m;
    } else if (fl == kInf && safe_high) {
      lo = m;
    } else {
      hi = m;
    }
  }
  probe(0.5 * (lo + hi));
  return best;
}

}  // namespace

TuneResult tune(const ObjectiveModel& model, const Vector& q0, const std::string& method, const TuneConfig& config) {
  if (!contains(tune_methods(), method)) throw std::invalid_argument("unknown method '" + method + "'");
  if (config.budget < 1) throw std::invalid_argument("tuning budget must be at least 1");
  if (!(0.0 < config.h_lo_factor && config.h_lo_factor < config.h_hi_factor)) {
    throw std::invalid_argument("bad stepsize range");
  }
  TuneResult result;
  result.method = method;
  result.budget = config.budget;

  auto objective = [&](double h, double beta) {
    ++result.evaluations;
    dopt::RunOptions opts;
    opts.max_iter = config.budget;
    const dopt::Trajectory traj = dopt::run(model, tune_params(method, h, beta), q0, opts);
    if (traj.status == dopt::RunStatus::kDiverged) return kInf;
    const double gap = traj.records.back().phi_gap;
    return std::isnan(gap) ? model.value(traj.final_state.q) : gap;
  };

  const bool has_beta = method == "polyak" || method == "hhb" || method == "hihb";
  // Momentum is searched through s = log(1 - beta) in [log 1e-6, 0].
  const double s_lo = std::log(1e-6), s_hi = 0.0;
  auto over_h = [&](double log_h, double& beta_out) {
    const double h = std::exp(log_h);
    if (!has_beta) {
      beta_out = 0.0;
      return objective(h, 0.0);
    }
    const Best inner = bisect_min(
        [&](double s, double& aux) {
          aux = 1.0 - std::exp(s);
          return objective(h, aux);
        },
        s_lo, s_hi, config.scan_points, config.inner_iters, /*safe_high=*/true);
    beta_out = inner.aux;
    return inner.f;
  };

  const double L = model.lipschitz();
  const Best outer = bisect_min(over_h, std::log(config.h_lo_factor / L), std::log(config.h_hi_factor / L),
                                config.scan_points, config.outer_iters, /*safe_high=*/false);
  result.params = tune_params(method, std::exp(outer.x), outer.aux);
  result.gap = outer.f;
  return result;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const LogregConfig& c) {
  return {{"n", c.n},           {"m", c.m},         {"seed", c.seed},       {"max_iter", c.max_iter},
          {"target", c.target}, {"tune", to_json(c.tune)}, {"methods", c.methods}};
}

const LogregRun& LogregExperiment::find(const std::string& method) const {
  for (const auto& r : runs)
    if (r.tuned.method == method) return r;
  throw std::out_of_range("no run for " + method);
}

std::optional<long> iterations_to(const dopt::Trajectory& traj, double target) {
  for (const auto& rec : traj.records)
    if (rec.phi_gap <= target) return rec.k;
  return std::nullopt;
}

long gd_reference_budget(const ObjectiveModel& model, const Vector& q0, double target, long cap) {
  dopt::RunOptions opts;
  opts.max_iter = cap;
  opts.grad_tol = 0.0;
  const auto params = dopt::AlgoParams::from_h(1.0 / model.lipschitz(), 0.0, 0.0, dopt::Variant::kGradient);
  dopt::IterState s = dopt::initial_state(q0, params);
  for (long k = 0; k < cap; ++k) {
    if (model.gap(s.q) <= target) return std::max(1L, k);
    s = dopt::step(s, params, model);
  }
  return cap;
}

LogregExperiment run_logreg(const LogregConfig& config) {
  LogregExperiment ex;
  ex.model = std::make_shared<LogisticModel>(gen_logistic_dataset(config.n, config.m, config.seed));
  ex.q0 = Vector::Zero(config.n);
  ex.reference_grad_norm = attach_gd_reference(*ex.model, ex.q0);
  if (!(ex.reference_grad_norm <= 1e-10)) {
    throw std::runtime_error("gradient-descent reference did not converge (gradient norm " +
                             fmt17(ex.reference_grad_norm) + ")");
  }
  TuneConfig tc = config.tune;
  if (tc.budget < 1) tc.budget = gd_reference_budget(*ex.model, ex.q0, config.target);
  ex.budget = tc.budget;
  for (const auto& method : config.methods) {
    LogregRun r;
    r.tuned = tune(*ex.model, ex.q0, method, tc);
    dopt::RunOptions opts;
    opts.max_iter = config.max_iter;
    r.traj = dopt::run(*ex.model, r.tuned.params, ex.q0, opts);
    r.iters_to_target = iterations_to(r.traj, config.target);
    ex.runs.push_back(std::move(r));
  }
  return ex;
}

std::string trajectories_svg(const std::vector<std::pair<std::string, const dopt::Trajectory*>>& series,
                             const std::string& title) {
  std::vector<svg::Series> out;
  for (const auto& [name, traj] : series) {
    svg::Series s{name, {}, {}};
    for (const auto& r : traj->records) {
      s.x.push_back(static_cast<double>(r.k));
      s.y.push_back(r.phi_gap);
    }
    out.push_back(std::move(s));
  }
  return svg::line_chart(out, {title, "k", "phi(q_k) - phi*", true});
}

}  // namespace hbreset::exp
