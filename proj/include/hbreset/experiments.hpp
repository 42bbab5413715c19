#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hbreset/discrete_opt.hpp"
#include "hbreset/lmi_cert.hpp"
#include "hbreset/objectives.hpp"
#include "json.hpp"

namespace hbreset::exp {

// ---------------------------------------------------------------------------
// Rate certification sweeps

enum class TuningRule {
  kMisTuned,  // h = 1/(2L), beta_hi = 1 - 0.1 sqrt(h)
  kOptimal,   // Nesterov: h = 1/L, beta = (sqrt L - sqrt mu)/(sqrt L + sqrt mu); Polyak: squared ratio, h = 4/(sqrt L + sqrt mu)^2
};

const char* to_string(TuningRule rule);
TuningRule tuning_rule_from_string(const std::string& name);

/// nesterov, hhb-nes, hihb-nes, polyak, hhb-pol, hihb-pol.
const std::vector<std::string>& certify_methods();

/// Request for one method under a tuning rule. hhb-* use beta_lo = 0 and
/// hihb-* use beta_lo = min(1 - sqrt(h), beta_hi); nesterov and polyak are
/// time invariant and use the single-branch LMI.
lmi::DtRequest certify_request(const std::string& method, double mu, double L, TuningRule rule);

struct SweepRow {
  double L = 0.0;
  double mu = 1.0;
  double h = 0.0;
  double beta_hi = 0.0;
  double beta_lo = 0.0;
  std::string method;
  std::optional<double> rho;  // empty: uncertified
  bool monotone = true;
  std::optional<lmi::Certificate> certificate;
  lmi::DtRequest request;
};

std::vector<SweepRow> certify_sweep(const std::vector<double>& grid_L, const std::vector<std::string>& methods,
                                    TuningRule rule, double mu, const lmi::CertOptions& options = {});

/// Columns L, mu, h, beta_hi, beta_lo, method, rho; rho is "uncertified"
/// when no certificate exists at rho = 1.
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);
std::vector<SweepRow> read_sweep_csv(std::istream& in);

/// rho against L, one series per method.
std::string sweep_svg(const std::vector<SweepRow>& rows, const std::string& title);

// ---------------------------------------------------------------------------
// Random quadratic trajectories

/// polyak, nesterov, hhb-pol, hhb-nes, hihb-pol, hihb-nes.
const std::vector<std::string>& quad_methods();

/// Parameters for damping K at stepsize h. Classic methods use
/// beta = 1 - sqrt(h) K on both branches, hhb-* reset to beta_lo = 0, and
/// hihb-* switch to beta_lo = 1 - sqrt(h) K_hi.
dopt::AlgoParams quad_params(const std::string& method, double h, double K, double K_hi);

struct QuadConfig {
  int n = 50;
  double L = 1e3;
  double h = 1e-4;
  long iters = 5000;
  std::vector<double> K = {1.97, 0.5, 1.0, 1.5};
  double hihb_K_hi = 10.0;
  std::vector<std::string> methods = quad_methods();
  std::uint64_t seed = 1;
};

nlohmann::json to_json(const QuadConfig& c);

struct QuadRun {
  std::string method;
  double K = 0.0;
  dopt::AlgoParams params;
  dopt::Trajectory traj;
  long nonmonotone = 0;
  double final_gap = 0.0;
  double tail_slope = 0.0;
};

struct QuadExperiment {
  std::shared_ptr<QuadraticModel> model;
  Vector q0;
  std::vector<QuadRun> runs;

  const QuadRun& find(const std::string& method, double K) const;
};

/// Entries uniform on [-100, 100], drawn from a stream derived from the seed.
Vector quad_initial_point(int n, std::uint64_t seed);

/// Generates the quadratic and q0 (entries uniform on [-100, 100]) from the
/// seed and runs every (method, K) pair. Iterations are carried out on the
/// error q - q*, where they coincide with the original iteration shifted by
/// q*, so gaps far below |q*| * 1e-16 stay resolvable.
QuadExperiment run_quad(const QuadConfig& config);

/// Least-squares slope of log(gap) against k over the last `fraction` of the
/// records (nonpositive gaps skipped).
double tail_slope(const dopt::Trajectory& traj, double fraction = 0.5);

// ---------------------------------------------------------------------------
// Tuning

/// gd: h. polyak: h and beta. nesterov: h, with the alpha schedule.
/// hhb: h and beta_hi with beta_lo = 0. hihb: h and beta_lo with
/// beta_hi = 1. hhb and hihb use the Polyak form.
const std::vector<std::string>& tune_methods();

struct TuneConfig {
  long budget = 0;            // iterations; 0 picks it from the problem
  double h_lo_factor = 1e-3;  // search h in [h_lo_factor, h_hi_factor] / L
  double h_hi_factor = 10.0;
  int scan_points = 16;  // coarse grid before each bisection
  int outer_iters = 20;
  int inner_iters = 16;
};

nlohmann::json to_json(const TuneConfig& c);

struct TuneResult {
  std::string method;
  dopt::AlgoParams params;
  double gap = 0.0;  // at the budget
  long budget = 0;
  long evaluations = 0;
};

nlohmann::json to_json(const TuneResult& r);

/// dopt::AlgoParams for a tuned method family at (h, beta).
dopt::AlgoParams tune_params(const std::string& method, double h, double beta);

/// Coarse scan plus bisection over log h on the sign of a central
/// difference of the gap at the budget; for methods with a momentum
/// coefficient each probed h runs the same nested search over
/// log(1 - beta). Deterministic.
TuneResult tune(const ObjectiveModel& model, const Vector& q0, const std::string& method, const TuneConfig& config);

// ---------------------------------------------------------------------------
// Logistic regression

struct LogregConfig {
  int n = 20;
  int m = 1000;
  std::uint64_t seed = 1;
  long max_iter = 200;
  double target = 1e-6;
  TuneConfig tune;
  std::vector<std::string> methods = tune_methods();
};

nlohmann::json to_json(const LogregConfig& c);

struct LogregRun {
  TuneResult tuned;
  dopt::Trajectory traj;
  std::optional<long> iters_to_target;
};

struct LogregExperiment {
  std::shared_ptr<LogisticModel> model;
  Vector q0;
  double reference_grad_norm = 0.0;
  long budget = 0;
  std::vector<LogregRun> runs;

  const LogregRun& find(const std::string& method) const;
};

/// Iterations gradient descent with h = 1/L needs to bring the gap to
/// `target`; the default tuning budget for the logistic experiment.
long gd_reference_budget(const ObjectiveModel& model, const Vector& q0, double target, long cap = 100000);

/// Builds the dataset, attaches the gradient-descent reference minimizer
/// (throws std::runtime_error unless its gradient norm reaches 1e-10),
/// tunes every method and reruns it for max_iter iterations from q0 = 0.
LogregExperiment run_logreg(const LogregConfig& config);

std::optional<long> iterations_to(const dopt::Trajectory& traj, double target);

// ---------------------------------------------------------------------------

/// Gap against k, one series per trajectory, log-scale y axis.
std::string trajectories_svg(const std::vector<std::pair<std::string, const dopt::Trajectory*>>& series,
                             const std::string& title);

}  // namespace hbreset::exp
