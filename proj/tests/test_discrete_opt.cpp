#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "hbreset/discrete_opt.hpp"
#include "hbreset/rng.hpp"

using namespace hbreset;
using namespace hbreset::dopt;

namespace {

std::shared_ptr<QuadraticModel> scalar_half_square() {
  return std::make_shared<QuadraticModel>(QuadraticSpec{Matrix::Identity(1, 1), Vector::Zero(1)});
}

Vector random_vector(Xoshiro256& rng, int n, double scale) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * rng.uniform(-1.0, 1.0);
  return v;
}

// Textbook heavy ball: x+ = x - h grad(x) + beta (x - x_prev).
std::vector<Vector> polyak_oracle(const ObjectiveModel& m, double h, double beta, Vector x, long steps) {
  std::vector<Vector> out{x};
  Vector prev = x;
  for (long k = 0; k < steps; ++k) {
    Vector next = x - h * m.gradient(x) + beta * (x - prev);
    prev = x;
    x = next;
    out.push_back(x);
  }
  return out;
}

// Textbook Nesterov: y = x + beta (x - x_prev), x+ = y - h grad(y).
std::vector<Vector> nesterov_oracle(const ObjectiveModel& m, double h, double beta, Vector x, long steps) {
  std::vector<Vector> out{x};
  Vector prev = x;
  for (long k = 0; k < steps; ++k) {
    const Vector y = x + beta * (x - prev);
    Vector next = y - h * m.gradient(y);
    prev = x;
    x = next;
    out.push_back(x);
  }
  return out;
}

std::vector<Vector> iterates(const ObjectiveModel& m, const AlgoParams& p, const Vector& q0, long steps) {
  std::vector<Vector> out;
  RunOptions o;
  o.max_iter = steps;
  o.observer = [&](const IterState& s) { out.push_back(s.q); };
  run(m, p, q0, o);
  return out;
}

}  // namespace

TEST_CASE("switching law") {
  const AlgoParams p = AlgoParams::from_eps(0.1, 0.2, 0.9, Variant::kPolyak);
  const Vector g = Eigen::Vector2d(1, 0);
  SwitchDecision d = switching_beta(g, Vector::Zero(2), p);
  CHECK(d.is_reset);
  CHECK(d.beta == 0.2);
  d = switching_beta(g, Eigen::Vector2d(-1, 0), p);
  CHECK_FALSE(d.is_reset);
  CHECK(d.beta == 0.9);
  d = switching_beta(g, Eigen::Vector2d(1, 0), p);
  CHECK(d.is_reset);

  const AlgoParams same = AlgoParams::from_eps(0.1, 0.5, 0.5, Variant::kPolyak);
  Xoshiro256 rng(1);
  for (int i = 0; i < 50; ++i) CHECK(switching_beta(random_vector(rng, 3, 1), random_vector(rng, 3, 1), same).beta == 0.5);
}

TEST_CASE("parameter validation and JSON") {
  CHECK_THROWS_AS(AlgoParams::from_eps(0.1, 0.9, 0.2, Variant::kPolyak), std::invalid_argument);
  CHECK_THROWS_AS(AlgoParams::from_eps(0.0, 0.0, 0.5, Variant::kPolyak), std::invalid_argument);
  AlgoParams bad = AlgoParams::from_eps(0.1, 0.0, 0.5, Variant::kPolyak);
  bad.h = 0.0100001;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  const AlgoParams d = AlgoParams::from_damping(0.01, 1.0, 10.0, Variant::kNesterov);
  CHECK(d.eps == doctest::Approx(0.1));
  CHECK(d.beta_hi == doctest::Approx(0.9));
  CHECK(d.beta_lo == doctest::Approx(0.0));
  const AlgoParams back = params_from_json(to_json(d));
  CHECK(back.eps == d.eps);
  CHECK(back.h == d.h);
  CHECK(back.beta_lo == d.beta_lo);
  CHECK(back.beta_hi == d.beta_hi);
  CHECK(back.variant == d.variant);
  CHECK(variant_from_string(to_string(Variant::kNesterovSchedule)) == Variant::kNesterovSchedule);
  CHECK_THROWS_AS(variant_from_string("adam"), std::invalid_argument);
}

TEST_CASE("Polyak-form step by hand") {
  auto m = scalar_half_square();
  const AlgoParams p = AlgoParams::from_eps(0.1, 0.3, 0.7, Variant::kPolyak);
  const IterState s0 = initial_state(Vector::Ones(1), p);
  StepInfo info;
  const IterState s1 = step_pol(s0, p, *m, &info);
  CHECK(s1.q(0) == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(s1.p(0) == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(s1.k == 1);
  CHECK(info.is_reset);

  const IterState rest = initial_state(Vector::Zero(1), p);
  CHECK(step_pol(rest, p, *m).q(0) == 0.0);
  CHECK_THROWS_AS(step_pol(s0, AlgoParams::from_eps(0.1, 0.3, 0.7, Variant::kNesterov), *m), std::invalid_argument);
}

TEST_CASE("time-invariant Polyak matches the textbook recursion") {
  auto m = gen_random_quadratic(6, 100.0, 2);
  const double h = 1.0 / 100.0, beta = 0.8;
  const AlgoParams p = AlgoParams::from_h(h, beta, beta, Variant::kPolyak);
  Xoshiro256 rng(3);
  const Vector q0 = random_vector(rng, 6, 10.0);
  const auto ours = iterates(*m, p, q0, 200);
  const auto ref = polyak_oracle(*m, h, beta, q0, 200);
  REQUIRE(ours.size() == ref.size());
  for (std::size_t k = 0; k < ours.size(); ++k) CHECK((ours[k] - ref[k]).norm() <= 1e-11 * (1.0 + ref[k].norm()));
}

TEST_CASE("Nesterov-form step") {
  auto m = gen_random_quadratic(5, 50.0, 4);
  const double h = 1.0 / 50.0, beta = 0.6;
  Xoshiro256 rng(4);
  const Vector q0 = random_vector(rng, 5, 10.0);

  const auto ours = iterates(*m, AlgoParams::from_h(h, beta, beta, Variant::kNesterov), q0, 200);
  const auto ref = nesterov_oracle(*m, h, beta, q0, 200);
  for (std::size_t k = 0; k < ours.size(); ++k) CHECK((ours[k] - ref[k]).norm() <= 1e-11 * (1.0 + ref[k].norm()));

  // Zero momentum: both forms coincide.
  const AlgoParams pn = AlgoParams::from_h(h, 0.1, 0.9, Variant::kNesterov);
  const AlgoParams pp = AlgoParams::from_h(h, 0.1, 0.9, Variant::kPolyak);
  CHECK(step_nes(initial_state(q0, pn), pn, *m).q == step_pol(initial_state(q0, pp), pp, *m).q);

  // A reset step of HHB-Nes is a plain gradient step.
  const AlgoParams hhb = AlgoParams::from_h(h, 0.0, 0.9, Variant::kNesterov);
  IterState s = initial_state(q0, hhb, Vector(m->gradient(q0)));
  StepInfo info;
  const IterState next = step_nes(s, hhb, *m, &info);
  REQUIRE(info.is_reset);
  CHECK(next.q == q0 - h * m->gradient(q0));
}

TEST_CASE("momentum schedule") {
  auto [beta0, a1] = nesterov_beta_schedule(1.0);
  CHECK(beta0 == 0.0);
  CHECK(a1 == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-15));
  double a = 1.0;
  for (int k = 0; k < 200; ++k) {
    auto [beta, next] = nesterov_beta_schedule(a);
    CHECK(next > 0.0);
    CHECK(next < a);
    CHECK(std::abs(next * next - (1.0 - next) * a * a) <= 1e-12);
    CHECK(beta == doctest::Approx(a * (1.0 - a) / (a * a + next)));
    a = next;
  }
  CHECK(nesterov_beta_schedule(1e-12).second < 1e-12);
  CHECK_THROWS_AS(nesterov_beta_schedule(0.0), std::invalid_argument);
  CHECK_THROWS_AS(nesterov_beta_schedule(1.5), std::invalid_argument);
}

TEST_CASE("gradient descent baseline") {
  auto m = scalar_half_square();
  const AlgoParams one = AlgoParams::from_h(1.0, 0.0, 0.0, Variant::kGradient);
  CHECK(step_gd(initial_state(Vector::Ones(1), one), one, *m).q(0) == 0.0);
  const AlgoParams zero = AlgoParams::from_h(0.0, 0.0, 0.0, Variant::kGradient);
  const Vector q0 = Eigen::Vector2d(3, -4);
  auto m2 = gen_random_quadratic(2, 5.0, 1);
  CHECK(step_gd(initial_state(q0, zero), zero, *m2).q == q0);

  auto big = gen_random_quadratic(10, 200.0, 5);
  Xoshiro256 rng(5);
  RunOptions o;
  o.max_iter = 500;
  const Trajectory t = run(*big, AlgoParams::from_h(1.0 / 200.0, 0, 0, Variant::kGradient), random_vector(rng, 10, 50), o);
  CHECK(count_nonmonotone(t) == 0);
}

TEST_CASE("run bookkeeping") {
  auto m = gen_random_quadratic(4, 10.0, 6);
  const AlgoParams p = AlgoParams::from_damping(0.01, 1.0, 5.0, Variant::kNesterov);
  Xoshiro256 rng(6);
  const Vector q0 = random_vector(rng, 4, 5);
  RunOptions o;
  o.max_iter = 0;
  CHECK_THROWS_AS(run(*m, p, q0, o), std::invalid_argument);

  o.max_iter = 37;
  long bad = 0;
  o.observer = [&](const IterState& s) {
    const Vector d = s.q - s.q_prev;
    if ((s.p * p.eps - d).norm() > 1e-12 * std::max(1e-300, d.norm()) && d.norm() > 0) ++bad;
  };
  const Trajectory t = run(*m, p, q0, o);
  CHECK(bad == 0);
  CHECK(t.iterations() == 37);
  CHECK(t.records.size() == 38);
  CHECK(t.records.front().phi_gap == doctest::Approx(m->gap(q0)));

  o.observer = nullptr;
  o.grad_tol = 1e100;
  const Trajectory done = run(*m, p, q0, o);
  CHECK(done.status == RunStatus::kConverged);
  CHECK(done.iterations() == 0);

  const Trajectory at_min = run(*m, p, *m->minimizer(), RunOptions{});
  CHECK(count_nonmonotone(at_min) == 0);

  std::ostringstream csv;
  write_csv(t, csv);
  CHECK(csv.str().rfind("k,phi_gap,inner_sign,beta,reset,grad_norm\n", 0) == 0);

  const Trajectory blow = run(*m, AlgoParams::from_h(10.0, 0.5, 0.5, Variant::kPolyak), q0, RunOptions{});
  CHECK(blow.status == RunStatus::kDiverged);

  LogisticModel logi(gen_logistic_dataset(3, 10, 1));
  o.grad_tol = 0;
  const Trajectory unknown = run(logi, p, Vector::Zero(3), o);
  CHECK(std::isnan(unknown.records.back().phi_gap));
  CHECK_THROWS_AS(count_nonmonotone(unknown), std::logic_error);
}

TEST_CASE("equal momentum branches reproduce the time-invariant method") {
  auto m = gen_random_quadratic(8, 1000.0, 7);
  Xoshiro256 rng(7);
  const Vector q0 = random_vector(rng, 8, 100);
  RunOptions o;
  o.max_iter = 400;
  const double beta = 1.0 - 0.01 * 1.5;
  const Trajectory a = run(*m, AlgoParams::from_eps(0.01, beta, beta, Variant::kPolyak), q0, o);
  const auto ref = polyak_oracle(*m, 1e-4, beta, q0, 400);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].phi_gap == doctest::Approx(m->gap(ref[k])).epsilon(1e-9));
  }
}

TEST_CASE("reset is followed by flow for small enough steps") {
  auto m = gen_random_quadratic(5, 100.0, 9);
  Xoshiro256 rng(9);
  std::vector<std::pair<Vector, Vector>> states;
  for (int i = 0; i < 1000; ++i) states.push_back({random_vector(rng, 5, 10), random_vector(rng, 5, 10)});
  double eps = 1.0;
  bool holds = false;
  for (int halving = 0; halving < 30 && !holds; ++halving, eps *= 0.5) {
    const AlgoParams p = AlgoParams::from_eps(eps, 0.0, 1.0 - eps, Variant::kPolyak);
    holds = true;
    for (const auto& [q, mom] : states) {
      IterState s = initial_state(q, p, mom);
      StepInfo first, second;
      s = step_pol(s, p, *m, &first);
      if (!first.is_reset) continue;
      step_pol(s, p, *m, &second);
      if (second.is_reset) {
        holds = false;
        break;
      }
    }
  }
  CHECK(holds);
}

TEST_CASE("fewer oscillations with hard resets on an ill-conditioned quadratic") {
  auto m = gen_random_quadratic(50, 1e3, 1);
  Xoshiro256 rng(3);
  const Vector e0 = random_vector(rng, 50, 100);
  const QuadraticModel centered({m->spec().Q, Vector::Zero(50)});
  RunOptions o;
  o.max_iter = 5000;
  const double eps = 0.01, beta = 1.0 - eps * 1.0;
  const Trajectory pol = run(centered, AlgoParams::from_eps(eps, beta, beta, Variant::kPolyak), e0, o);
  const Trajectory hhb = run(centered, AlgoParams::from_eps(eps, 0.0, beta, Variant::kPolyak), e0, o);
  CHECK(count_nonmonotone(hhb) < count_nonmonotone(pol));
  CHECK(hhb.records.back().phi_gap < pol.records.back().phi_gap);
}
