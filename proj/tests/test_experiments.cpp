#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "hbreset/experiments.hpp"
#include "hbreset/svg.hpp"

using namespace hbreset;
using namespace hbreset::exp;

TEST_CASE("certification requests") {
  const double L = 16.0;
  const lmi::DtRequest nes = certify_request("nesterov", 1.0, L, TuningRule::kOptimal);
  CHECK_FALSE(nes.switched);
  CHECK(nes.h == doctest::Approx(1.0 / L));
  CHECK(nes.beta_hi == doctest::Approx(3.0 / 5.0));
  const lmi::DtRequest pol = certify_request("polyak", 1.0, L, TuningRule::kOptimal);
  CHECK(pol.h == doctest::Approx(4.0 / 25.0));
  CHECK(pol.beta_hi == doctest::Approx(9.0 / 25.0));
  CHECK(pol.discretization == lmi::Discretization::kPolyak);

  const lmi::DtRequest hhb = certify_request("hhb-nes", 1.0, L, TuningRule::kMisTuned);
  CHECK(hhb.switched);
  CHECK(hhb.h == doctest::Approx(1.0 / 32.0));
  CHECK(hhb.beta_hi == doctest::Approx(1.0 - 0.1 * std::sqrt(1.0 / 32.0)));
  CHECK(hhb.beta_lo == 0.0);
  const lmi::DtRequest hihb = certify_request("hihb-nes", 1.0, L, TuningRule::kMisTuned);
  CHECK(hihb.beta_lo == doctest::Approx(1.0 - std::sqrt(1.0 / 32.0)));
  // The reset coefficient never exceeds the nominal one.
  CHECK(certify_request("hihb-nes", 1.0, L, TuningRule::kOptimal).beta_lo <= nes.beta_hi);
  CHECK_THROWS_AS(certify_request("adam", 1.0, L, TuningRule::kOptimal), std::invalid_argument);
  CHECK(tuning_rule_from_string(to_string(TuningRule::kMisTuned)) == TuningRule::kMisTuned);
}

TEST_CASE("sweep output round trip") {
  const auto rows = certify_sweep({1.0, 10.0, 50.0}, {"nesterov", "hhb-nes", "polyak"}, TuningRule::kMisTuned, 1.0);
  REQUIRE(rows.size() == 9);
  std::ostringstream csv;
  write_sweep_csv(rows, csv);
  CHECK(csv.str().rfind("L,mu,h,beta_hi,beta_lo,method,rho\n", 0) == 0);
  std::istringstream in(csv.str());
  const auto back = read_sweep_csv(in);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].method == rows[i].method);
    CHECK(back[i].L == rows[i].L);
    CHECK(back[i].rho == rows[i].rho);
  }
  std::ostringstream again;
  write_sweep_csv(back, again);
  CHECK(again.str() == csv.str());
  CHECK(sweep_svg(back, "rates") == sweep_svg(rows, "rates"));
  CHECK(sweep_svg(rows, "rates").find("<svg") != std::string::npos);

  // The certified rate of the time-invariant method grows with L.
  std::optional<double> prev;
  for (const auto& r : rows) {
    if (r.method != "nesterov") continue;
    REQUIRE(r.rho);
    if (prev) CHECK(*r.rho >= *prev);
    prev = r.rho;
  }
}

TEST_CASE("quadratic experiment parameters and bookkeeping") {
  const dopt::AlgoParams p = quad_params("hhb-pol", 1e-4, 1.0, 10.0);
  CHECK(p.beta_hi == doctest::Approx(0.99));
  CHECK(p.beta_lo == 0.0);
  CHECK(p.variant == dopt::Variant::kPolyak);
  const dopt::AlgoParams q = quad_params("hihb-nes", 1e-4, 1.0, 10.0);
  CHECK(q.beta_lo == doctest::Approx(0.9));
  CHECK(q.variant == dopt::Variant::kNesterov);
  CHECK(quad_params("polyak", 1e-4, 1.0, 10.0).beta_lo == quad_params("polyak", 1e-4, 1.0, 10.0).beta_hi);

  QuadConfig c;
  c.n = 8;
  c.L = 100.0;
  c.h = 1e-3;
  c.iters = 400;
  c.K = {1.0};
  const QuadExperiment a = run_quad(c), b = run_quad(c);
  REQUIRE(a.runs.size() == quad_methods().size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].final_gap == b.runs[i].final_gap);
    CHECK(a.runs[i].traj.iterations() == 400);
  }
  CHECK(a.q0.cwiseAbs().maxCoeff() <= 100.0);
  CHECK(a.find("hhb-pol", 1.0).method == "hhb-pol");
  CHECK_THROWS(a.find("hhb-pol", 2.0));
  CHECK(to_json(c).at("seed") == 1);
}

TEST_CASE("tail slope of a geometric sequence") {
  dopt::Trajectory t;
  for (int k = 0; k <= 100; ++k) {
    dopt::IterRecord r;
    r.k = k;
    r.phi_gap = 3.0 * std::pow(0.9, k);
    t.records.push_back(r);
  }
  CHECK(tail_slope(t) == doctest::Approx(std::log(0.9)));
  t.records[90].phi_gap = 0.0;
  CHECK(tail_slope(t, 0.3) == doctest::Approx(std::log(0.9)));
}

TEST_CASE("tuning on a quadratic") {
  auto model = gen_random_quadratic(10, 50.0, 2);
  const Vector q0 = Vector::Constant(10, 1.0);
  TuneConfig cfg;
  cfg.budget = 30;
  const TuneResult gd = tune(*model, q0, "gd", cfg);
  // The best fixed step for gradient descent sits between 1/L and 2/L.
  CHECK(gd.params.h >= 0.5 / model->lipschitz());
  CHECK(gd.params.h <= 2.0 / model->lipschitz());
  CHECK(gd.budget == 30);
  CHECK(gd.evaluations > 0);

  const TuneResult nes = tune(*model, q0, "nesterov", cfg);
  CHECK(nes.params.h >= 0.5 / model->lipschitz());
  CHECK(nes.params.h <= 2.0 / model->lipschitz());
  const TuneResult again = tune(*model, q0, "nesterov", cfg);
  CHECK(again.params.h == nes.params.h);
  CHECK(again.gap == nes.gap);

  const TuneResult pol = tune(*model, q0, "polyak", cfg);
  CHECK(pol.gap <= gd.gap);
  const TuneResult hihb = tune(*model, q0, "hihb", cfg);
  CHECK(hihb.params.beta_hi == 1.0);
  if (std::abs(std::log(hihb.params.h / pol.params.h)) > std::log(2.0)) {
    MESSAGE("hihb and polyak settled on different stepsizes: ", hihb.params.h, " vs ", pol.params.h);
  }
  CHECK(to_json(pol).at("method") == "polyak");

  cfg.budget = 0;
  CHECK_THROWS_AS(tune(*model, q0, "gd", cfg), std::invalid_argument);
  cfg.budget = 10;
  CHECK_THROWS_AS(tune(*model, q0, "lbfgs", cfg), std::invalid_argument);
}

TEST_CASE("small logistic experiment") {
  LogregConfig c;
  c.n = 5;
  c.m = 100;
  c.max_iter = 60;
  c.tune.outer_iters = 8;
  c.tune.inner_iters = 6;
  c.tune.scan_points = 6;
  const LogregExperiment e = run_logreg(c);
  CHECK(e.reference_grad_norm <= 1e-10);
  CHECK(e.budget >= 1);
  CHECK(e.q0.isZero());
  REQUIRE(e.runs.size() == tune_methods().size());
  for (const auto& r : e.runs) {
    CHECK(r.traj.iterations() == 60);
    CHECK(r.tuned.budget == e.budget);
  }
  const auto& gd = e.find("gd");
  REQUIRE(gd.iters_to_target);
  CHECK(*gd.iters_to_target <= 60);
  CHECK(iterations_to(gd.traj, 1e300) == 0);
  CHECK_FALSE(iterations_to(gd.traj, -1.0));
  const double h_pol = e.find("polyak").tuned.params.h, h_hihb = e.find("hihb").tuned.params.h;
  if (std::abs(h_hihb - h_pol) > 1e-3 * h_pol) {
    MESSAGE("warning: tuned hihb stepsize ", h_hihb, " differs from tuned polyak stepsize ", h_pol);
  }
  const std::string svg = trajectories_svg({{"gd", &gd.traj}}, "gap");
  CHECK(svg == trajectories_svg({{"gd", &gd.traj}}, "gap"));
}
