#include "hbreset/lmi_cert.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace hbreset::lmi {

Matrix kron_identity(const Matrix& m, int n) {
  Matrix out = Matrix::Zero(m.rows() * n, m.cols() * n);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out.block(i * n, j * n, n, n) = m(i, j) * Matrix::Identity(n, n);
  return out;
}

namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// [[C, 0], [0, I_n]]^T S [[C, 0], [0, I_n]] for an n x 2n output map C.
Matrix conjugate_sector(const Matrix& C, const Matrix& sector, int n) {
  Matrix lift = Matrix::Zero(2 * n, C.cols() + n);
  lift.topLeftCorner(n, C.cols()) = C;
  lift.bottomRightCorner(n, n) = Matrix::Identity(n, n);
  return symmetrize(lift.transpose() * sector * lift);
}

Matrix weight_block(double corner, int n) {
  Matrix w(2, 2);
  w << corner, 0.5, 0.5, 0.0;
  return kron_identity(w, n);
}

// Symmetric basis of 2n x 2n matrices: E_ii, and E_ij + E_ji for i < j.
struct SymBasis {
  std::vector<std::pair<int, int>> entries;
  int size = 0;

  explicit SymBasis(int dim) : size(dim) {
    for (int i = 0; i < dim; ++i) entries.emplace_back(i, i);
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) entries.emplace_back(i, j);
  }
  int count() const { return static_cast<int>(entries.size()); }
  bool diagonal(int k) const { return entries[static_cast<std::size_t>(k)].first == entries[static_cast<std::size_t>(k)].second; }
  Matrix element(int k) const {
    Matrix e = Matrix::Zero(size, size);
    const auto [i, j] = entries[static_cast<std::size_t>(k)];
    e(i, j) = 1.0;
    e(j, i) = 1.0;
    return e;
  }
  Matrix assemble(const Vector& v, int offset) const {
    Matrix P = Matrix::Zero(size, size);
    for (int k = 0; k < count(); ++k) P += v(offset + k) * element(k);
    return P;
  }
};

// Adds P variables (with P >= margin), scalar multipliers with floors, the
// normalization trace(P) + sum(multipliers) = 1 and the matching box.
struct VariableLayout {
  SymBasis basis;
  std::vector<std::string> multipliers;

  VariableLayout(int p_dim, std::vector<std::string> names) : basis(p_dim), multipliers(std::move(names)) {}

  int p_count() const { return basis.count(); }
  int index(const std::string& name) const {
    for (std::size_t k = 0; k < multipliers.size(); ++k)
      if (multipliers[k] == name) return p_count() + static_cast<int>(k);
    throw std::logic_error("unknown multiplier " + name);
  }

  sdp::FeasProblem skeleton(const CertOptions& options) const {
    sdp::FeasProblem problem;
    problem.num_vars = p_count() + static_cast<int>(multipliers.size());
    problem.margin = options.margin;
    for (int k = 0; k < p_count(); ++k) {
      const auto [i, j] = basis.entries[static_cast<std::size_t>(k)];
      problem.var_names.push_back("P" + std::to_string(i) + std::to_string(j));
      problem.bounds.push_back(i == j ? sdp::VariableBound{0.0, 1.0} : sdp::VariableBound{-1.0, 1.0});
    }
    sdp::Normalization norm;
    for (int k = 0; k < p_count(); ++k)
      if (basis.diagonal(k)) norm.weights.emplace_back(k, 1.0);
    for (std::size_t m = 0; m < multipliers.size(); ++m) {
      const int idx = p_count() + static_cast<int>(m);
      problem.var_names.push_back(multipliers[m]);
      problem.bounds.push_back({0.0, 1.0});
      problem.nonneg.emplace_back(idx, options.multiplier_floor);
      norm.weights.emplace_back(idx, 1.0);
    }
    problem.normalization = norm;

    sdp::AffineMatrixMap p_map(Matrix::Zero(basis.size, basis.size));
    for (int k = 0; k < p_count(); ++k) p_map.add(k, basis.element(k));
    problem.pd_blocks.push_back({"P", p_map, 0.0});
    return problem;
  }

  Certificate extract(const sdp::FeasResult& result, const std::string& kind) const {
    Certificate cert;
    cert.rate_kind = kind;
    cert.P = basis.assemble(result.v, 0);
    for (std::size_t m = 0; m < multipliers.size(); ++m)
      cert.multipliers[multipliers[m]] = result.v(p_count() + static_cast<int>(m));
    cert.margin = result.worst_eig;
    return cert;
  }
};

CertOutcome finish(const sdp::FeasProblem& problem, const CertOptions& options, const VariableLayout& layout,
                   const std::string& kind) {
  CertOutcome out;
  out.raw = sdp::solve_feasibility(problem, options.solver);
  if (options.on_solve) options.on_solve(problem, out.raw);
  switch (out.raw.status) {
    case sdp::FeasStatus::kFeasible:
      out.status = CertStatus::kCertified;
      out.certificate = layout.extract(out.raw, kind);
      break;
    case sdp::FeasStatus::kInfeasible: out.status = CertStatus::kInfeasible; break;
    case sdp::FeasStatus::kIndeterminate: out.status = CertStatus::kIndeterminate; break;
  }
  return out;
}

}  // namespace

SectorMatrix build_sector(double mu, double L, int n) {
  if (!(mu > 0.0)) throw std::invalid_argument("sector matrix needs mu > 0");
  if (mu > L) throw std::invalid_argument("sector matrix needs mu <= L");
  Matrix s(2, 2);
  s << -mu * L / (mu + L), 0.5, 0.5, -1.0 / (mu + L);
  return {kron_identity(s, n), mu, L};
}

// ---------------------------------------------------------------------------

Matrix CtLmiData::M_flow(const Matrix& P, double alpha) const {
  const int d = 2 * n;
  Matrix out = Matrix::Zero(3 * n, 3 * n);
  out.topLeftCorner(d, d) = P * A + A.transpose() * P + 2.0 * alpha * P;
  out.topRightCorner(d, n) = P * B;
  out.bottomLeftCorner(n, d) = B.transpose() * P;
  return symmetrize(out);
}

Matrix CtLmiData::M_jump(const Matrix& P) const {
  const int d = 2 * n;
  Matrix out = Matrix::Zero(3 * n, 3 * n);
  out.topLeftCorner(d, d) = A_R.transpose() * P * A_R - P;
  return symmetrize(out);
}

CtLmiData build_ct(double K, int n, double mu, double L, CtInputMatrix input) {
  if (!(K > 0.0)) throw std::invalid_argument("continuous-time LMI needs K > 0");
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  CtLmiData data;
  data.n = n;
  data.K = K;
  data.mu = mu;
  data.lipschitz = L;
  const Matrix I = Matrix::Identity(n, n);
  data.A = Matrix::Zero(2 * n, 2 * n);
  data.A.topRightCorner(n, n) = I;
  data.A.bottomRightCorner(n, n) = -K * I;
  data.A_R = Matrix::Zero(2 * n, 2 * n);
  data.A_R.topLeftCorner(n, n) = I;
  data.B = Matrix::Zero(2 * n, n);
  data.B.bottomRows(n) = -I;
  if (input == CtInputMatrix::kSubstituted) data.B.topRows(n) = -I;
  data.C = Matrix::Zero(n, 2 * n);
  data.C.leftCols(n) = I;

  data.M_phi = conjugate_sector(data.C, build_sector(mu, L, n).m, n);
  data.M_0 = Matrix::Zero(3 * n, 3 * n);
  data.M_0.block(n, 2 * n, n, n) = -0.5 * I;
  data.M_0.block(2 * n, n, n, n) = -0.5 * I;
  data.eps_direction = Matrix::Zero(3 * n, 3 * n);
  data.eps_direction.topLeftCorner(2 * n, 2 * n) = Matrix::Identity(2 * n, 2 * n);
  return data;
}

// ---------------------------------------------------------------------------

const char* to_string(Discretization d) { return d == Discretization::kPolyak ? "POL" : "NES"; }

DtBranch build_dt(double h, double beta, Discretization discretization, int n) {
  if (!(h > 0.0)) throw std::invalid_argument("stepsize must be positive");
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("beta must lie in [0, 1]");
  const Matrix I = Matrix::Identity(n, n);
  DtBranch br;
  br.beta = beta;
  br.A = Matrix::Zero(2 * n, 2 * n);
  br.A.topRightCorner(n, n) = I;
  br.A.bottomLeftCorner(n, n) = -beta * I;
  br.A.bottomRightCorner(n, n) = (beta + 1.0) * I;
  br.B = Matrix::Zero(2 * n, n);
  br.B.bottomRows(n) = -h * I;
  br.E = Matrix::Zero(n, 2 * n);
  br.E.rightCols(n) = I;
  if (discretization == Discretization::kPolyak) {
    br.C = br.E;
  } else {
    br.C.resize(n, 2 * n);
    br.C.leftCols(n) = -beta * I;
    br.C.rightCols(n) = (beta + 1.0) * I;
  }
  return br;
}

DtSystemMatrices build_dt_system(double h, double beta_hi, double beta_lo, Discretization discretization, int n) {
  if (!(0.0 <= beta_lo && beta_lo <= beta_hi && beta_hi <= 1.0)) {
    throw std::invalid_argument("need 0 <= beta_lo <= beta_hi <= 1");
  }
  DtSystemMatrices sys;
  sys.discretization = discretization;
  sys.h = h;
  sys.beta_hi = beta_hi;
  sys.beta_lo = beta_lo;
  sys.n = n;
  sys.nominal = build_dt(h, beta_hi, discretization, n);
  sys.reset = build_dt(h, beta_lo, discretization, n);
  return sys;
}

Matrix DtBranchLmi::M_P(const Matrix& P, double rho) const {
  const auto d = P.rows();
  Matrix out = G.transpose() * P * G;
  out.topLeftCorner(d, d) -= rho * rho * P;
  return symmetrize(out);
}

DtBranchLmi build_branch_lmi(const DtBranch& br, double mu, double L, int n) {
  if (!(mu > 0.0) || mu > L) throw std::invalid_argument("need 0 < mu <= L");
  DtBranchLmi out;
  out.G.resize(2 * n, 3 * n);
  out.G << br.A, br.B;

  out.sigma1 = Matrix::Zero(2 * n, 3 * n);
  out.sigma1.topLeftCorner(n, 2 * n) = br.E * br.A - br.C;
  out.sigma1.topRightCorner(n, n) = br.E * br.B;
  out.sigma1.bottomRightCorner(n, n) = Matrix::Identity(n, n);

  out.sigma2 = Matrix::Zero(2 * n, 3 * n);
  out.sigma2.topLeftCorner(n, 2 * n) = br.C - br.E;
  out.sigma2.bottomRightCorner(n, n) = Matrix::Identity(n, n);

  out.N1 = symmetrize(out.sigma1.transpose() * weight_block(0.5 * L, n) * out.sigma1);
  out.N2 = symmetrize(out.sigma2.transpose() * weight_block(-0.5 * mu, n) * out.sigma2);
  out.N3 = conjugate_sector(br.C, weight_block(-0.5 * mu, n), n);
  out.M1 = out.N1 + out.N2;
  out.M2 = out.N1 + out.N3;
  out.M3 = conjugate_sector(br.C, build_sector(mu, L, n).m, n);
  return out;
}

DtLmiData build_switched_lmi(const DtSystemMatrices& sys, double mu, double L, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0, 1]");
  DtLmiData data;
  data.n = sys.n;
  data.mu = mu;
  data.lipschitz = L;
  data.rho = rho;
  data.nominal = build_branch_lmi(sys.nominal, mu, L, sys.n);
  data.reset = build_branch_lmi(sys.reset, mu, L, sys.n);
  const int n = sys.n;
  const Matrix I = Matrix::Identity(n, n);
  data.M = Matrix::Zero(3 * n, 3 * n);
  data.M.block(0, 2 * n, n, n) = 0.5 * I;
  data.M.block(n, 2 * n, n, n) = -0.5 * I;
  data.M.block(2 * n, 0, n, n) = 0.5 * I;
  data.M.block(2 * n, n, n, n) = -0.5 * I;
  return data;
}

Matrix DtLmiData::lhs_nominal(const Matrix& P, double a, double lambda, double sigma) const {
  const double r2 = rho * rho;
  return nominal.M_P(P, rho) + a * r2 * nominal.M1 + a * (1.0 - r2) * nominal.M2 + lambda * nominal.M3 + sigma * M;
}

Matrix DtLmiData::lhs_reset(const Matrix& P, double a, double lambda_r, double sigma_r) const {
  const double r2 = rho * rho;
  return reset.M_P(P, rho) + a * r2 * reset.M1 + a * (1.0 - r2) * reset.M2 + lambda_r * reset.M3 - sigma_r * M;
}

// ---------------------------------------------------------------------------

double Certificate::quadratic_part(const Vector& x_err) const {
  const auto blocks = P.rows();
  if (blocks == 0 || x_err.size() % blocks != 0) throw std::invalid_argument("state size does not match P");
  const int n = static_cast<int>(x_err.size() / blocks);
  double total = 0.0;
  for (Eigen::Index i = 0; i < blocks; ++i)
    for (Eigen::Index j = 0; j < blocks; ++j)
      total += P(i, j) * x_err.segment(i * n, n).dot(x_err.segment(j * n, n));
  return total;
}

double Certificate::guarantee_constant(double initial_gap, const Vector& x0_err) const {
  const auto it = multipliers.find("a");
  if (rate_kind != "rho" || it == multipliers.end()) {
    throw std::logic_error("guarantee constant is defined for discrete-time certificates");
  }
  const double a = it->second;
  return (a * initial_gap + quadratic_part(x0_err)) / a;
}

nlohmann::json to_json(const Certificate& cert) {
  nlohmann::json P = nlohmann::json::array();
  for (Eigen::Index i = 0; i < cert.P.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(cert.P.cols()));
    for (Eigen::Index j = 0; j < cert.P.cols(); ++j) row[static_cast<std::size_t>(j)] = cert.P(i, j);
    P.push_back(row);
  }
  return {{"rate", cert.rate},     {"rate_kind", cert.rate_kind}, {"P", P},
          {"multipliers", cert.multipliers}, {"margin", cert.margin}, {"tuning", cert.tuning}};
}

Certificate certificate_from_json(const nlohmann::json& j) {
  Certificate cert;
  cert.rate = j.at("rate").get<double>();
  cert.rate_kind = j.at("rate_kind").get<std::string>();
  const auto rows = j.at("P").get<std::vector<std::vector<double>>>();
  cert.P.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw std::invalid_argument("P must be square");
    for (std::size_t k = 0; k < rows.size(); ++k)
      cert.P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  cert.multipliers = j.at("multipliers").get<std::map<std::string, double>>();
  cert.margin = j.at("margin").get<double>();
  if (j.contains("tuning")) cert.tuning = j.at("tuning");
  return cert;
}

const char* to_string(CertStatus status) {
  switch (status) {
    case CertStatus::kCertified: return "certified";
    case CertStatus::kInfeasible: return "infeasible";
    case CertStatus::kIndeterminate: return "indeterminate";
  }
  return "?";
}

// ---------------------------------------------------------------------------

sdp::FeasProblem pose_switched_lmi(const DtLmiData& data, const CertOptions& options) {
  const VariableLayout layout(2 * data.n, {"a", "lambda", "lambda_R", "sigma", "sigma_R"});
  sdp::FeasProblem problem = layout.skeleton(options);
  const int dim = 3 * data.n;
  const double r2 = data.rho * data.rho;

  sdp::AffineMatrixMap nominal(Matrix::Zero(dim, dim));
  sdp::AffineMatrixMap reset(Matrix::Zero(dim, dim));
  for (int k = 0; k < layout.p_count(); ++k) {
    const Matrix Pk = layout.basis.element(k);
    nominal.add(k, data.nominal.M_P(Pk, data.rho));
    reset.add(k, data.reset.M_P(Pk, data.rho));
  }
  nominal.add(layout.index("a"), r2 * data.nominal.M1 + (1.0 - r2) * data.nominal.M2);
  nominal.add(layout.index("lambda"), data.nominal.M3);
  nominal.add(layout.index("sigma"), data.M);
  reset.add(layout.index("a"), r2 * data.reset.M1 + (1.0 - r2) * data.reset.M2);
  reset.add(layout.index("lambda_R"), data.reset.M3);
  reset.add(layout.index("sigma_R"), -data.M);
  problem.nsd_blocks.push_back({"nominal", std::move(nominal), 0.0});
  problem.nsd_blocks.push_back({"reset", std::move(reset), 0.0});
  return problem;
}

CertOutcome dt_feasible(const DtLmiData& data, const CertOptions& options) {
  const VariableLayout layout(2 * data.n, {"a", "lambda", "lambda_R", "sigma", "sigma_R"});
  CertOutcome out = finish(pose_switched_lmi(data, options), options, layout, "rho");
  if (out.certificate) out.certificate->rate = data.rho;
  return out;
}

sdp::FeasProblem pose_single_branch(const DtBranchLmi& branch, double rho, const CertOptions& options) {
  const int n = static_cast<int>(branch.G.rows() / 2);
  const VariableLayout layout(2 * n, {"a", "lambda"});
  sdp::FeasProblem problem = layout.skeleton(options);
  const double r2 = rho * rho;
  sdp::AffineMatrixMap lmi(Matrix::Zero(3 * n, 3 * n));
  for (int k = 0; k < layout.p_count(); ++k) lmi.add(k, branch.M_P(layout.basis.element(k), rho));
  lmi.add(layout.index("a"), r2 * branch.M1 + (1.0 - r2) * branch.M2);
  lmi.add(layout.index("lambda"), branch.M3);
  problem.nsd_blocks.push_back({"single", std::move(lmi), 0.0});
  return problem;
}

CertOutcome single_branch_feasible(const DtBranch& branch, double mu, double L, double rho,
                                   const CertOptions& options) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0, 1]");
  const int n = static_cast<int>(branch.A.rows() / 2);
  const VariableLayout layout(2 * n, {"a", "lambda"});
  const DtBranchLmi lmi = build_branch_lmi(branch, mu, L, n);
  CertOutcome out = finish(pose_single_branch(lmi, rho, options), options, layout, "rho");
  if (out.certificate) out.certificate->rate = rho;
  return out;
}

sdp::FeasProblem pose_ct(const CtLmiData& data, double alpha, double eps_infl, const CertOptions& options) {
  if (!(alpha > 0.0) || !(eps_infl > 0.0)) throw std::invalid_argument("alpha and eps must be positive");
  const VariableLayout layout(2 * data.n, {"sigma_phi", "sigma_1", "sigma_2"});
  sdp::FeasProblem problem = layout.skeleton(options);
  const int dim = 3 * data.n;
  sdp::AffineMatrixMap flow(Matrix::Zero(dim, dim));
  sdp::AffineMatrixMap jump(Matrix::Zero(dim, dim));
  for (int k = 0; k < layout.p_count(); ++k) {
    const Matrix Pk = layout.basis.element(k);
    flow.add(k, data.M_flow(Pk, alpha));
    jump.add(k, data.M_jump(Pk));
  }
  flow.add(layout.index("sigma_phi"), data.M_phi);
  flow.add(layout.index("sigma_1"), data.M_eps(eps_infl));
  jump.add(layout.index("sigma_2"), -data.M_0);
  problem.nsd_blocks.push_back({"flow", std::move(flow), 0.0});
  problem.nsd_blocks.push_back({"jump", std::move(jump), 2.0 * options.margin});
  return problem;
}

CertOutcome ct_feasible(const CtLmiData& data, double alpha, double eps_infl, const CertOptions& options) {
  const VariableLayout layout(2 * data.n, {"sigma_phi", "sigma_1", "sigma_2"});
  CertOutcome out = finish(pose_ct(data, alpha, eps_infl, options), options, layout, "alpha");
  if (out.certificate) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(out.certificate->P, Eigen::EigenvaluesOnly);
    const double cond = eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
    out.certificate->rate = alpha / cond;
    out.certificate->multipliers["alpha"] = alpha;
    out.certificate->multipliers["eps"] = eps_infl;
  }
  return out;
}

// ---------------------------------------------------------------------------

BisectResult bisect_rate(const std::function<CertOutcome(double)>& probe, double lo, double hi, int iters,
                         SearchDirection direction, int scan_points) {
  if (!(lo < hi)) throw std::invalid_argument("bisection needs lo < hi");
  BisectResult result;
  const bool smallest = direction == SearchDirection::kSmallestFeasible;
  // t = 0 is the easy end: hi when searching for the smallest feasible value,
  // lo otherwise.
  auto param = [&](double t) { return smallest ? hi - (hi - lo) * t : lo + (hi - lo) * t; };

  auto run = [&](double t) {
    ++result.probes;
    return probe(param(t));
  };

  const int points = std::max(scan_points, 2);
  std::vector<CertOutcome> scan;
  scan.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) scan.push_back(run(static_cast<double>(i) / (points - 1)));

  // Longest feasible prefix from the easy end.
  int prefix = 0;
  while (prefix < points && scan[static_cast<std::size_t>(prefix)].status == CertStatus::kCertified) ++prefix;
  for (int i = prefix; i < points; ++i)
    if (scan[static_cast<std::size_t>(i)].status == CertStatus::kCertified) result.monotone = false;

  if (prefix == 0) return result;  // no certificate at the easy end
  if (prefix == points) {
    result.rate = param(1.0);
    result.certificate = scan.back().certificate;
    return result;
  }
  double good = static_cast<double>(prefix - 1) / (points - 1);
  double bad = static_cast<double>(prefix) / (points - 1);
  std::optional<Certificate> cert = scan[static_cast<std::size_t>(prefix - 1)].certificate;
  for (int it = 0; it < iters; ++it) {
    const double mid = 0.5 * (good + bad);
    CertOutcome out = run(mid);
    if (out.status == CertStatus::kCertified) {
      good = mid;
      cert = std::move(out.certificate);
    } else {
      bad = mid;
    }
  }
  result.rate = param(good);
  result.certificate = std::move(cert);
  return result;
}

nlohmann::json to_json(const DtRequest& r) {
  return {{"discretization", to_string(r.discretization)},
          {"h", r.h},
          {"beta_hi", r.beta_hi},
          {"beta_lo", r.beta_lo},
          {"mu", r.mu},
          {"L", r.lipschitz},
          {"n", r.n},
          {"switched", r.switched}};
}

DtRequest reduce_to_scalar(DtRequest request) {
  request.n = 1;
  return request;
}

CertOutcome probe_dt(const DtRequest& request, double rho, const CertOptions& options) {
  const DtRequest r = reduce_to_scalar(request);
  CertOutcome out;
  if (r.switched) {
    const auto sys = build_dt_system(r.h, r.beta_hi, r.beta_lo, r.discretization, 1);
    out = dt_feasible(build_switched_lmi(sys, r.mu, r.lipschitz, rho), options);
  } else {
    out = single_branch_feasible(build_dt(r.h, r.beta_hi, r.discretization, 1), r.mu, r.lipschitz, rho, options);
  }
  if (out.certificate) out.certificate->tuning = to_json(request);
  return out;
}

BisectResult certify_dt(const DtRequest& request, const CertOptions& options, int iters, int scan_points) {
  return bisect_rate([&](double rho) { return probe_dt(request, rho, options); }, 1e-6, 1.0, iters,
                     SearchDirection::kSmallestFeasible, scan_points);
}

}  // namespace hbreset::lmi
