#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hbreset/cert_check.hpp"
#include "hbreset/discrete_opt.hpp"
#include "hbreset/lmi_cert.hpp"
#include "hbreset/rng.hpp"
#include "oracles.hpp"

using namespace hbreset;
using namespace hbreset::lmi;

namespace {

double max_eig(const Matrix& m) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

Vector random_vector(Xoshiro256& rng, int n, double scale = 1.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

Vector stack(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

Vector stack(const Vector& a, const Vector& b, const Vector& c) { return stack(stack(a, b), c); }

struct Tuning {
  double h, beta;
};

Tuning optimal(Discretization d, double L) {
  const double s = std::sqrt(L);
  if (d == Discretization::kNesterov) return {1.0 / L, (s - 1) / (s + 1)};
  return {4.0 / ((s + 1) * (s + 1)), std::pow((s - 1) / (s + 1), 2)};
}

DtRequest time_invariant(Discretization d, double L) {
  const Tuning t = optimal(d, L);
  DtRequest r;
  r.discretization = d;
  r.h = t.h;
  r.beta_hi = r.beta_lo = t.beta;
  r.mu = 1.0;
  r.lipschitz = L;
  r.switched = false;
  return r;
}

}  // namespace

TEST_CASE("sector matrix") {
  const SectorMatrix a = build_sector(1, 1);
  CHECK(a.m(0, 0) == doctest::Approx(-0.5));
  CHECK(a.m(0, 1) == doctest::Approx(0.5));
  CHECK(a.m(1, 1) == doctest::Approx(-0.5));
  const SectorMatrix b = build_sector(1, 3);
  CHECK(b.m(0, 0) == doctest::Approx(-0.75));
  CHECK(b.m(1, 0) == doctest::Approx(0.5));
  CHECK(b.m(1, 1) == doctest::Approx(-0.25));
  CHECK(build_sector(1, 3, 2).m.rows() == 4);
  CHECK_THROWS_AS(build_sector(2, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_sector(0, 1), std::invalid_argument);
}

TEST_CASE("continuous-time matrices") {
  const CtLmiData d = build_ct(2.0, 1, 1.0, 10.0);
  Matrix A(2, 2), B(2, 1);
  A << 0, 1, 0, -2;
  B << 0, -1;
  CHECK(d.A == A);
  CHECK(d.B == B);
  CHECK(d.A_R(0, 0) == 1.0);
  CHECK(d.A_R.sum() == 1.0);
  CHECK(d.C(0, 0) == 1.0);
  CHECK(d.C(0, 1) == 0.0);
  CHECK(build_ct(2.0, 1, 1.0, 10.0, CtInputMatrix::kSubstituted).B(0, 0) == -1.0);
  const CtLmiData d3 = build_ct(1.5, 3, 1.0, 4.0);
  CHECK(d3.M_phi.rows() == 9);
  CHECK((d3.M_phi - d3.M_phi.transpose()).norm() == 0.0);
  CHECK((d3.M_eps(0.3) - d3.M_eps(0.3).transpose()).norm() == 0.0);
  const Matrix P = Matrix::Identity(6, 6);
  CHECK((d3.M_flow(P, 0.1) - d3.M_flow(P, 0.1).transpose()).norm() == 0.0);
  CHECK_THROWS_AS(build_ct(0.0, 1, 1, 2), std::invalid_argument);
}

TEST_CASE("continuous-time identities on random samples") {
  Xoshiro256 rng(11);
  const int n = 3;
  const CtLmiData d = build_ct(1.0, n, 1.0, 10.0);
  for (int s = 0; s < 1000; ++s) {
    const Vector q = random_vector(rng, n), p = random_vector(rng, n), g = random_vector(rng, n);
    const double eps = rng.uniform(0, 2);
    const Vector e = stack(q, p, g);
    const double scale = 1.0 + e.squaredNorm();
    CHECK(std::abs(e.dot(d.M_0 * e) + p.dot(g)) <= 1e-12 * scale);
    CHECK(std::abs(e.dot(d.M_eps(eps) * e) - (-p.dot(g) + eps * (q.squaredNorm() + p.squaredNorm()))) <=
          1e-12 * scale);
  }
}

TEST_CASE("discrete-time matrices") {
  const DtBranch pol = build_dt(0.1, 0.0, Discretization::kPolyak);
  Matrix A(2, 2);
  A << 0, 1, 0, 1;
  CHECK(pol.A == A);
  CHECK(pol.B(1, 0) == -0.1);
  CHECK(build_dt(0.1, 0.0, Discretization::kNesterov).C == pol.C);

  const double h = 0.05, beta = 0.7;
  const DtBranchLmi lmi = build_branch_lmi(build_dt(h, beta, Discretization::kPolyak), 1, 10, 1);
  CHECK(lmi.sigma1(0, 0) == doctest::Approx(-beta));
  CHECK(lmi.sigma1(0, 1) == doctest::Approx(beta));
  CHECK(lmi.sigma1(0, 2) == doctest::Approx(-h));

  const oracle::ScalarBranch ref = oracle::scalar_branch(true, h, beta, 1, 10);
  const DtBranchLmi nes = build_branch_lmi(build_dt(h, beta, Discretization::kNesterov), 1, 10, 1);
  CHECK((nes.M1 - ref.M1).norm() <= 1e-14);
  CHECK((nes.M2 - ref.M2).norm() <= 1e-14);
  CHECK((nes.M3 - ref.M3).norm() <= 1e-14);

  CHECK_THROWS_AS(build_dt(0.0, 0.5, Discretization::kPolyak), std::invalid_argument);
  CHECK_THROWS_AS(build_dt_system(0.1, 0.3, 0.5, Discretization::kPolyak), std::invalid_argument);
  CHECK_THROWS_AS(build_switched_lmi(build_dt_system(0.1, 0.5, 0.3, Discretization::kPolyak), 1, 2, 1.5),
                  std::invalid_argument);
}

TEST_CASE("state recursion matches the iteration") {
  auto model = std::make_shared<QuadraticModel>(QuadraticSpec{Matrix::Constant(1, 1, 7.0), Vector::Constant(1, 2.0)});
  for (Discretization disc : {Discretization::kPolyak, Discretization::kNesterov}) {
    const double h = 0.08, beta = 0.6;
    const DtBranch br = build_dt(h, beta, disc);
    const auto params = dopt::AlgoParams::from_h(
        h, beta, beta, disc == Discretization::kPolyak ? dopt::Variant::kPolyak : dopt::Variant::kNesterov);
    dopt::IterState st = dopt::initial_state(Vector::Constant(1, 3.0), params, Vector::Constant(1, -2.0));
    Vector x(2);
    x << st.q_prev(0), st.q(0);
    for (int k = 0; k < 20; ++k) {
      const Vector u = model->gradient(br.C * x);
      x = br.A * x + br.B * u;
      st = dopt::step(st, params, *model);
      CHECK(std::abs(x(1) - st.q(0)) <= 1e-12 * (1.0 + std::abs(x(1))));
      CHECK(std::abs(x(0) - st.q_prev(0)) <= 1e-12 * (1.0 + std::abs(x(0))));
    }
  }
}

TEST_CASE("proof identity and function bounds on random samples") {
  Xoshiro256 rng(21);
  const int n = 4;
  for (Discretization disc : {Discretization::kPolyak, Discretization::kNesterov}) {
    for (int trial = 0; trial < 5; ++trial) {
      const double L = 2.0 + 20.0 * rng.uniform();
      auto gen = gen_random_quadratic(n, L, 100 + static_cast<std::uint64_t>(trial));
      // Quadratic with minimizer 0 and phi* = 0, so errors are the states themselves.
      QuadraticModel model(QuadraticSpec{gen->spec().Q, Vector::Zero(n)});
      const double h = rng.uniform(0.1, 2.0) / L, beta = rng.uniform();
      const auto sys = build_dt_system(h, beta, beta, disc, n);
      const DtLmiData data = build_switched_lmi(sys, model.mu(), model.lipschitz(), 0.9);
      const DtBranch& br = sys.nominal;
      const DtBranchLmi& lmi = data.nominal;
      for (int s = 0; s < 200; ++s) {
        const Vector x = stack(random_vector(rng, n), random_vector(rng, n));
        const Vector u = model.gradient(br.C * x);
        const Vector e = stack(x, u);
        const Vector next = br.A * x + br.B * u;
        const double scale = 1.0 + e.squaredNorm() * (1.0 + L);
        const Vector x1 = x.head(n), x2 = x.tail(n);

        CHECK(std::abs(e.dot(data.M * e) + u.dot(x2 - x1)) <= 1e-8 * scale);
        const double f_next = model.value(br.E * next), f_now = model.value(br.E * x);
        CHECK(f_next - f_now <= e.dot(lmi.M1 * e) + 1e-8 * scale);
        CHECK(f_next <= e.dot(lmi.M2 * e) + 1e-8 * scale);
        CHECK(e.dot(lmi.M3 * e) >= -1e-8 * scale);
      }
    }
  }
}

TEST_CASE("accelerated rate is certified and the certificate checks out") {
  const DtRequest req = time_invariant(Discretization::kNesterov, 10.0);
  const BisectResult br = certify_dt(req);
  REQUIRE(br.rate);
  REQUIRE(br.certificate);
  CHECK(br.monotone);
  const double rho = *br.rate;
  CHECK(rho * rho <= 1.0 - std::sqrt(0.1) + 0.02);
  // Never better than the spectral radius on the extreme eigenvalues.
  CHECK(rho >= oracle::closed_loop_radius(true, req.h, req.beta_hi, 1.0) - 1e-6);
  CHECK(rho >= oracle::closed_loop_radius(true, req.h, req.beta_hi, 10.0) - 1e-6);

  const Certificate& c = *br.certificate;
  CHECK(c.rate == rho);
  const oracle::ScalarBranch ref = oracle::scalar_branch(true, req.h, req.beta_hi, 1, 10);
  Matrix lhs = Matrix::Zero(3, 3);
  lhs.topLeftCorner(2, 2) = -rho * rho * c.P;
  Eigen::Matrix<double, 2, 3> G;
  G << 0, 1, 0, -req.beta_hi, 1 + req.beta_hi, -req.h;
  lhs += G.transpose() * c.P * G;
  lhs += c.multipliers.at("a") * (rho * rho * ref.M1 + (1 - rho * rho) * ref.M2) + c.multipliers.at("lambda") * ref.M3;
  CHECK(max_eig(lhs) <= 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(c.P).eigenvalues().minCoeff() > 0.0);

  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto model = gen_random_quadratic(6, 10.0, seed);
    Xoshiro256 rng(seed + 50);
    const SoundnessReport rep = check_certificate(c, req, *model, random_vector(rng, 6, 10.0), 1000);
    CHECK(rep.lyapunov_ok());
    CHECK(rep.rate_ok());
  }
}

TEST_CASE("gradient descent embedding is feasible at rho = 1") {
  DtRequest req;
  req.discretization = Discretization::kPolyak;
  req.h = 1.0 / 10.0;
  req.beta_hi = req.beta_lo = 0.0;
  req.lipschitz = 10.0;
  req.switched = false;
  CHECK(probe_dt(req, 1.0).status == CertStatus::kCertified);
  req.switched = true;
  CHECK(probe_dt(req, 1.0).status == CertStatus::kCertified);
}

TEST_CASE("certificate serialization") {
  const CertOutcome out = probe_dt(time_invariant(Discretization::kPolyak, 4.0), 0.95);
  REQUIRE(out.certificate);
  const Certificate& c = *out.certificate;
  CHECK(c.tuning.at("L") == 4.0);
  const Certificate back = certificate_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(back.P == c.P);
  CHECK(back.multipliers == c.multipliers);
  CHECK(back.rate == c.rate);
  CHECK(back.rate_kind == "rho");
  CHECK(to_json(back).dump() == to_json(c).dump());
  CHECK_THROWS_AS(certificate_from_json(nlohmann::json::object()), nlohmann::json::exception);
  Vector x(2);
  x << 1, 2;
  CHECK(c.quadratic_part(x) == doctest::Approx(x.dot(c.P * x)));
  CHECK(c.guarantee_constant(0.0, x) == doctest::Approx(x.dot(c.P * x) / c.multipliers.at("a")));
}

TEST_CASE("rate search on synthetic probes") {
  auto threshold_probe = [](double t) {
    return [t](double x) {
      CertOutcome o;
      o.status = x >= t ? CertStatus::kCertified : CertStatus::kInfeasible;
      if (x >= t) {
        o.certificate = Certificate{};
        o.certificate->rate = x;
      }
      return o;
    };
  };
  const BisectResult a = bisect_rate(threshold_probe(0.37), 0.0, 1.0);
  REQUIRE(a.rate);
  CHECK(*a.rate >= 0.37);
  CHECK(*a.rate - 0.37 <= 1e-9);
  CHECK(a.certificate->rate == *a.rate);
  CHECK(a.monotone);

  CHECK_FALSE(bisect_rate(threshold_probe(2.0), 0.0, 1.0).rate);
  CHECK(*bisect_rate(threshold_probe(-1.0), 0.0, 1.0).rate == 0.0);

  auto below = [](double x) {
    CertOutcome o;
    o.status = x <= 3.0 ? CertStatus::kCertified : CertStatus::kIndeterminate;
    if (x <= 3.0) o.certificate = Certificate{};
    return o;
  };
  const BisectResult b = bisect_rate(below, 0.0, 10.0, 40, SearchDirection::kLargestFeasible);
  REQUIRE(b.rate);
  CHECK(*b.rate == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(*b.rate <= 3.0);

  auto gappy = [](double x) {
    CertOutcome o;
    o.status = (x >= 0.8 || (x > 0.3 && x < 0.4)) ? CertStatus::kCertified : CertStatus::kInfeasible;
    if (o.status == CertStatus::kCertified) o.certificate = Certificate{};
    return o;
  };
  const BisectResult g = bisect_rate(gappy, 0.0, 1.0);
  CHECK_FALSE(g.monotone);
  CHECK(*g.rate == doctest::Approx(0.8).epsilon(1e-6));
  CHECK_THROWS_AS(bisect_rate(gappy, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("reset momentum does not slow the mis-tuned method at large condition number") {
  const double L = 100.0, h = 1.0 / (2 * L), beta = 1.0 - 0.1 * std::sqrt(h);
  DtRequest nes;
  nes.discretization = Discretization::kNesterov;
  nes.h = h;
  nes.beta_hi = nes.beta_lo = beta;
  nes.lipschitz = L;
  nes.switched = false;
  DtRequest hhb = nes;
  hhb.switched = true;
  hhb.beta_lo = 0.0;
  const BisectResult a = certify_dt(nes), b = certify_dt(hhb);
  REQUIRE(a.rate);
  REQUIRE(b.rate);
  CHECK(*b.rate < *a.rate);
}

TEST_CASE("dimension reduction") {
  DtRequest req = time_invariant(Discretization::kPolyak, 4.0);
  req.n = 5;
  CHECK(reduce_to_scalar(req).n == 1);
  req.switched = true;
  req.beta_lo = 0.0;
  const double rho = 0.9;
  const CertOutcome out = probe_dt(req, rho);
  REQUIRE(out.certificate);
  const Certificate& c = *out.certificate;
  const auto& m = c.multipliers;
  for (int n : {1, 5}) {
    const auto sys = build_dt_system(req.h, req.beta_hi, req.beta_lo, req.discretization, n);
    const DtLmiData data = build_switched_lmi(sys, req.mu, req.lipschitz, rho);
    const Matrix P = kron_identity(c.P, n);
    CHECK(max_eig(data.lhs_nominal(P, m.at("a"), m.at("lambda"), m.at("sigma"))) <= 0.0);
    CHECK(max_eig(data.lhs_reset(P, m.at("a"), m.at("lambda_R"), m.at("sigma_R"))) <= 0.0);
  }
}

TEST_CASE("continuous-time certificate with the substituted input matrix") {
  const CtLmiData d = build_ct(1.0, 1, 1.0, 2.0, CtInputMatrix::kSubstituted);
  const CertOutcome out = ct_feasible(d, 0.05, 0.1);
  REQUIRE(out.status == CertStatus::kCertified);
  const Certificate& c = *out.certificate;
  CHECK(c.rate_kind == "alpha");
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(c.P).eigenvalues().minCoeff() >= 1e-9);
  const auto& m = c.multipliers;
  const Matrix flow = d.M_flow(c.P, m.at("alpha")) + m.at("sigma_phi") * d.M_phi + m.at("sigma_1") * d.M_eps(m.at("eps"));
  CHECK(max_eig(flow) <= 0.0);
  CHECK(max_eig(d.M_jump(c.P) - m.at("sigma_2") * d.M_0) <= 2e-9);
  CHECK(c.rate <= m.at("alpha"));

  CHECK(ct_feasible(build_ct(1.0, 1, 1.0, 10.0), 0.05, 0.1).status != CertStatus::kCertified);
  CHECK_THROWS_AS(ct_feasible(d, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("independent single-branch formulation agrees") {
  for (Discretization disc : {Discretization::kPolyak, Discretization::kNesterov}) {
    const DtRequest req = time_invariant(disc, 5.0);
    const bool nes = disc == Discretization::kNesterov;
    for (double rho : {0.5, 0.7, 0.8, 0.9, 1.0}) {
      const bool ours = probe_dt(req, rho).status == CertStatus::kCertified;
      CHECK(ours == oracle::baseline_feasible(nes, req.h, req.beta_hi, 1.0, 5.0, rho));
    }
  }
}
