#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbreset/sdp_feas.hpp"
#include "json.hpp"

namespace hbreset::lmi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// M (x) I_n.
Matrix kron_identity(const Matrix& m, int n);

// ---------------------------------------------------------------------------
// Sector constraint for mu-strongly convex functions with L-Lipschitz
// gradients: [v - w; grad(v) - grad(w)]^T M [v - w; grad(v) - grad(w)] >= 0.

struct SectorMatrix {
  Matrix m;  // 2n x 2n
  double mu = 0.0;
  double lipschitz = 0.0;
};

SectorMatrix build_sector(double mu, double L, int n = 1);

// ---------------------------------------------------------------------------
// Continuous time: heavy-ball flow with momentum reset.

enum class CtInputMatrix {
  kAsWritten,    // B = [0; -I]
  kSubstituted,  // B = [-I; -I]
};

struct CtLmiData {
  int n = 1;
  double K = 0.0;
  double mu = 0.0;
  double lipschitz = 0.0;
  Matrix A, A_R, B, C;  // 2n x 2n, 2n x 2n, 2n x n, n x 2n
  Matrix M_phi;         // 3n x 3n
  Matrix M_0;           // M_eps at eps = 0
  Matrix eps_direction; // M_eps = M_0 + eps * eps_direction

  Matrix M_eps(double eps) const { return M_0 + eps * eps_direction; }
  Matrix M_flow(const Matrix& P, double alpha) const;  // [PA + A^T P + 2 alpha P, PB; B^T P, 0]
  Matrix M_jump(const Matrix& P) const;                // [A_R^T P A_R - P, 0; 0, 0]
};

CtLmiData build_ct(double K, int n, double mu, double L, CtInputMatrix input = CtInputMatrix::kAsWritten);

// ---------------------------------------------------------------------------
// Discrete time: two-step methods in Lur'e form with state (q_{k-1}, q_k).

enum class Discretization { kPolyak, kNesterov };

const char* to_string(Discretization d);

struct DtBranch {
  double beta = 0.0;
  Matrix A, B, C, E;  // 2n x 2n, 2n x n, n x 2n, n x 2n
};

/// A = [0, I; -beta I, (beta + 1) I], B = [0; -h I], E = [0, I];
/// C = E for Polyak and C = [-beta I, (beta + 1) I] for Nesterov.
DtBranch build_dt(double h, double beta, Discretization discretization, int n = 1);

struct DtSystemMatrices {
  Discretization discretization = Discretization::kPolyak;
  double h = 0.0;
  double beta_hi = 0.0;
  double beta_lo = 0.0;
  int n = 1;
  DtBranch nominal;  // applied when <grad, x2 - x1> < 0
  DtBranch reset;    // applied otherwise
};

DtSystemMatrices build_dt_system(double h, double beta_hi, double beta_lo, Discretization discretization,
                                 int n = 1);

/// Fixed matrices of one branch of the discrete-time LMI. All are 3n x 3n
/// except the two Sigma factors, which are 2n x 3n.
struct DtBranchLmi {
  Matrix G;  // [A, B], so that M_P(P) = G^T P G - rho^2 diag(P, 0)
  Matrix sigma1, sigma2;
  Matrix N1, N2, N3;
  Matrix M1, M2, M3;

  Matrix M_P(const Matrix& P, double rho) const;
};

struct DtLmiData {
  int n = 1;
  double mu = 0.0;
  double lipschitz = 0.0;
  double rho = 1.0;
  DtBranchLmi nominal;
  DtBranchLmi reset;
  Matrix M;  // [0, 0, I/2; 0, 0, -I/2; I/2, -I/2, 0]

  /// Left-hand sides of the two LMIs for given (P, a, lambda, lambda_R,
  /// sigma, sigma_R).
  Matrix lhs_nominal(const Matrix& P, double a, double lambda, double sigma) const;
  Matrix lhs_reset(const Matrix& P, double a, double lambda_r, double sigma_r) const;
};

DtBranchLmi build_branch_lmi(const DtBranch& branch, double mu, double L, int n);
DtLmiData build_switched_lmi(const DtSystemMatrices& sys, double mu, double L, double rho);

// ---------------------------------------------------------------------------
// Certificates

struct Certificate {
  std::string rate_kind;  // "rho" or "alpha"
  double rate = 0.0;      // rho, or alpha / cond(P) for continuous time
  Matrix P;
  std::map<std::string, double> multipliers;
  double margin = 0.0;  // most positive (allowance-adjusted) constraint eigenvalue
  nlohmann::json tuning = nlohmann::json::object();

  /// (1/a) (a (phi(xi_0) - phi*) + x0_err^T (P (x) I) x0_err); discrete-time
  /// certificates only.
  double guarantee_constant(double initial_gap, const Vector& x0_err) const;
  /// x_err^T (P (x) I_n) x_err, with n inferred from the size of x_err.
  double quadratic_part(const Vector& x_err) const;
};

nlohmann::json to_json(const Certificate& cert);
Certificate certificate_from_json(const nlohmann::json& j);

enum class CertStatus { kCertified, kInfeasible, kIndeterminate };
const char* to_string(CertStatus status);

struct CertOutcome {
  CertStatus status = CertStatus::kIndeterminate;
  std::optional<Certificate> certificate;
  sdp::FeasResult raw;
};

struct CertOptions {
  double margin = 1e-9;
  double multiplier_floor = 1e-9;
  sdp::SolveOptions solver;
  // Called with every posed problem and its result (for --dump-sdp).
  std::function<void(const sdp::FeasProblem&, const sdp::FeasResult&)> on_solve;
};

/// Poses the two discrete-time LMIs over (P > 0, a, lambda, lambda_R, sigma,
/// sigma_R > 0) with trace(P) + sum of multipliers = 1.
sdp::FeasProblem pose_switched_lmi(const DtLmiData& data, const CertOptions& options = {});
CertOutcome dt_feasible(const DtLmiData& data, const CertOptions& options = {});

/// Single-branch LMI for time-invariant methods:
/// M_P + a rho^2 M1 + a (1 - rho^2) M2 + lambda M3 <= 0 over (P, a, lambda).
sdp::FeasProblem pose_single_branch(const DtBranchLmi& branch, double rho, const CertOptions& options = {});
CertOutcome single_branch_feasible(const DtBranch& branch, double mu, double L, double rho,
                                   const CertOptions& options = {});

/// Poses the continuous-time flow and jump LMIs over (P > 0, sigma_phi,
/// sigma_1, sigma_2 > 0). The jump LMI has structurally zero diagonal
/// entries, so it is imposed as lambda_max <= margin rather than <= -margin.
sdp::FeasProblem pose_ct(const CtLmiData& data, double alpha, double eps_infl, const CertOptions& options = {});
CertOutcome ct_feasible(const CtLmiData& data, double alpha, double eps_infl, const CertOptions& options = {});

// ---------------------------------------------------------------------------
// Rate search

enum class SearchDirection {
  kSmallestFeasible,  // rho: feasible above the threshold
  kLargestFeasible,   // alpha: feasible below the threshold
};

struct BisectResult {
  std::optional<double> rate;  // parameter at the threshold (feasible side)
  std::optional<Certificate> certificate;
  bool monotone = true;  // false when the coarse scan saw non-monotone feasibility
  int probes = 0;
};

/// Coarse scan of `scan_points` values on [lo, hi] followed by `iters`
/// halvings of the bracket around the threshold. Indeterminate probes count
/// as infeasible.
BisectResult bisect_rate(const std::function<CertOutcome(double)>& probe, double lo, double hi, int iters = 40,
                         SearchDirection direction = SearchDirection::kSmallestFeasible, int scan_points = 32);

/// A discrete-time certification request. When `switched` is false the
/// single-branch LMI is used with beta_hi (the time-invariant method).
struct DtRequest {
  Discretization discretization = Discretization::kNesterov;
  double h = 0.0;
  double beta_hi = 0.0;
  double beta_lo = 0.0;
  double mu = 1.0;
  double lipschitz = 1.0;
  int n = 1;
  bool switched = true;
};

nlohmann::json to_json(const DtRequest& request);

/// The system matrices are Kronecker products with I_n, so the LMI holds for
/// every n iff it holds for n = 1; all LMI work happens at n = 1.
DtRequest reduce_to_scalar(DtRequest request);

CertOutcome probe_dt(const DtRequest& request, double rho, const CertOptions& options = {});
BisectResult certify_dt(const DtRequest& request, const CertOptions& options = {}, int iters = 40,
                        int scan_points = 32);

}  // namespace hbreset::lmi
