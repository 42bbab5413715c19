#include "hbreset/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hbreset/rng.hpp"

namespace hbreset {

ObjectiveModel::ObjectiveModel(int dim, double mu, double lipschitz)
    : dim_(dim), mu_(mu), lipschitz_(lipschitz) {
  if (dim < 1) throw std::invalid_argument("objective dimension must be positive");
  if (!(lipschitz > 0.0)) throw std::invalid_argument("Lipschitz constant must be positive");
  if (mu < 0.0 || mu > lipschitz * (1.0 + 1e-12)) {
    throw std::invalid_argument("need 0 <= mu <= L");
  }
}

void ObjectiveModel::check_dim(const Vector& q) const {
  if (q.size() != dim_) {
    throw std::invalid_argument("point has dimension " + std::to_string(q.size()) + ", expected " +
                                std::to_string(dim_));
  }
}

double ObjectiveModel::gap(const Vector& q) const {
  if (!min_value_) throw std::logic_error("phi* is unknown for this objective");
  return value(q) - *min_value_;
}

void ObjectiveModel::set_minimizer(Vector q_star, bool check) {
  check_dim(q_star);
  if (check) {
    const double g = gradient(q_star).norm();
    const double tol = 1e-8 * std::max(1.0, q_star.norm());
    if (g > tol) {
      throw std::invalid_argument("gradient norm " + std::to_string(g) + " at proposed minimizer");
    }
  }
  min_value_ = value(q_star);
  minimizer_ = std::move(q_star);
}

// ---------------------------------------------------------------------------
// Quadratic

std::pair<double, Vector> quad_eval_grad(const QuadraticSpec& spec, const Vector& q) {
  if (q.size() != spec.Q.rows()) throw std::invalid_argument("dimension mismatch");
  Vector Qq = spec.Q * q;
  const double value = 0.5 * q.dot(Qq) + spec.b.dot(q);
  return {value, Qq + spec.b};
}

namespace {

std::pair<double, double> spectrum_bounds(const Matrix& Q) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Q, Eigen::EigenvaluesOnly);
  return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

const QuadraticSpec& validated(const QuadraticSpec& spec) {
  const auto n = spec.Q.rows();
  if (n < 1 || spec.Q.cols() != n || spec.b.size() != n) {
    throw std::invalid_argument("quadratic model has inconsistent dimensions");
  }
  const double asym = (spec.Q - spec.Q.transpose()).norm();
  if (asym > 1e-12 * std::max(1.0, spec.Q.norm())) {
    throw std::invalid_argument("Q is not symmetric");
  }
  return spec;
}

}  // namespace

QuadraticModel::QuadraticModel(QuadraticSpec spec)
    : ObjectiveModel(static_cast<int>(validated(spec).Q.rows()), spectrum_bounds(spec.Q).first,
                     spectrum_bounds(spec.Q).second),
      spec_(std::move(spec)) {
  if (!(mu() > 0.0)) throw std::invalid_argument("Q must be positive definite");
  Vector q_star = spec_.Q.ldlt().solve(-spec_.b);
  set_minimizer(q_star, /*check=*/false);
  set_min_value(0.5 * spec_.b.dot(q_star));
}

double QuadraticModel::value(const Vector& q) const { return quad_eval_grad(spec_, q).first; }

Vector QuadraticModel::gradient(const Vector& q) const {
  check_dim(q);
  return spec_.Q * q + spec_.b;
}

double QuadraticModel::gap(const Vector& q) const {
  check_dim(q);
  const Vector d = q - *minimizer();
  return 0.5 * d.dot(spec_.Q * d);
}

std::shared_ptr<QuadraticModel> gen_random_quadratic(int n, double L, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("random quadratic needs n >= 2");
  if (!(L >= 1.0)) throw std::invalid_argument("random quadratic needs L >= 1");
  Xoshiro256 rng(seed);
  Matrix raw(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) raw(i, j) = rng.normal();

  Eigen::JacobiSVD<Matrix> svd(raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double top = std::sqrt(L);
  Vector s(n);
  s(0) = top;
  s(n - 1) = 1.0;
  for (int i = 1; i < n - 1; ++i) s(i) = rng.uniform(1.0, top);

  const Matrix Qhat = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  QuadraticSpec spec;
  spec.Q = Qhat * Qhat.transpose();
  spec.Q = 0.5 * (spec.Q + spec.Q.transpose());
  spec.b.resize(n);
  for (int i = 0; i < n; ++i) spec.b(i) = rng.uniform(-100.0, 100.0);
  return std::make_shared<QuadraticModel>(std::move(spec));
}

// ---------------------------------------------------------------------------
// Logistic regression

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::pair<double, Vector> logistic_eval_grad(const LogisticSpec& spec, const Vector& q) {
  if (q.size() != spec.theta.rows()) throw std::invalid_argument("dimension mismatch");
  const Vector margins = spec.theta.transpose() * q;  // theta_i^T q
  double value = 0.0;
  Vector weights(spec.m());
  for (int i = 0; i < spec.m(); ++i) {
    const double z = -spec.labels(i) * margins(i);
    value += softplus(z);
    weights(i) = -spec.labels(i) * sigmoid(z);
  }
  return {value, spec.theta * weights};
}

namespace {

double quarter_top_eigenvalue(const Matrix& theta) {
  const Matrix gram = theta * theta.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return 0.25 * eig.eigenvalues().maxCoeff();
}

const LogisticSpec& validated(const LogisticSpec& spec) {
  if (spec.m() < 1 || spec.n() < 1) throw std::invalid_argument("logistic model needs n, m >= 1");
  if (spec.labels.size() != spec.m()) throw std::invalid_argument("label count mismatch");
  for (int i = 0; i < spec.m(); ++i) {
    if (spec.labels(i) != 1.0 && spec.labels(i) != -1.0) {
      throw std::invalid_argument("labels must be exactly +1 or -1");
    }
  }
  return spec;
}

}  // namespace

LogisticModel::LogisticModel(LogisticSpec spec, double lipschitz, double mu)
    : ObjectiveModel(validated(spec).n(), mu,
                     lipschitz > 0.0 ? lipschitz : quarter_top_eigenvalue(spec.theta)),
      spec_(std::move(spec)) {}

double LogisticModel::value(const Vector& q) const {
  check_dim(q);
  return logistic_eval_grad(spec_, q).first;
}

Vector LogisticModel::gradient(const Vector& q) const {
  check_dim(q);
  return logistic_eval_grad(spec_, q).second;
}

std::pair<double, Vector> LogisticModel::value_and_gradient(const Vector& q) const {
  check_dim(q);
  return logistic_eval_grad(spec_, q);
}

LogisticSpec gen_logistic_dataset(int n, int m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("logistic dataset needs n, m >= 1");
  Xoshiro256 rng(seed);
  LogisticSpec spec;
  spec.theta.resize(n, m);
  for (int i = 0; i < m; ++i)
    for (int r = 0; r < n; ++r) spec.theta(r, i) = rng.normal();
  spec.labels.resize(m);
  for (int i = 0; i < m; ++i) spec.labels(i) = rng.sign();
  return spec;
}

double attach_gd_reference(LogisticModel& model, const Vector& q0, long max_iter, double grad_tol) {
  const double h = 1.0 / model.lipschitz();
  Vector q = q0;
  Vector g = model.gradient(q);
  for (long k = 0; k < max_iter && g.norm() > grad_tol; ++k) {
    q -= h * g;
    g = model.gradient(q);
  }
  const double final_norm = g.norm();
  model.set_minimizer(q, /*check=*/false);
  return final_norm;
}

// ---------------------------------------------------------------------------

double finite_diff_check(const ObjectiveModel& model, const Vector& q, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const Vector analytic = model.gradient(q);
  const double scale = std::max(1.0, analytic.lpNorm<Eigen::Infinity>());
  double worst = 0.0;
  Vector probe = q;
  for (int i = 0; i < model.dim(); ++i) {
    probe(i) = q(i) + step;
    const double up = model.value(probe);
    probe(i) = q(i) - step;
    const double down = model.value(probe);
    probe(i) = q(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error("objective is not finite at a probe point");
    }
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(numeric - analytic(i)) / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const QuadraticSpec& spec) {
  const auto n = spec.Q.rows();
  std::vector<double> Q;
  Q.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) Q.push_back(spec.Q(i, j));
  return {{"Q", Q}, {"b", std::vector<double>(spec.b.data(), spec.b.data() + spec.b.size())}};
}

QuadraticSpec quadratic_from_json(const nlohmann::json& j) {
  const auto Q = j.at("Q").get<std::vector<double>>();
  const auto b = j.at("b").get<std::vector<double>>();
  const auto n = static_cast<Eigen::Index>(b.size());
  if (static_cast<Eigen::Index>(Q.size()) != n * n) {
    throw std::invalid_argument("Q must hold n*n row-major entries");
  }
  QuadraticSpec spec;
  spec.Q.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < n; ++c) spec.Q(i, c) = Q[static_cast<std::size_t>(i * n + c)];
  spec.b = Eigen::Map<const Vector>(b.data(), n);
  return spec;
}

nlohmann::json to_json(const LogisticSpec& spec) {
  // Eigen's default storage is column-major, which is the wire layout.
  std::vector<double> theta(spec.theta.data(), spec.theta.data() + spec.theta.size());
  return {{"theta", theta},
          {"labels", std::vector<double>(spec.labels.data(), spec.labels.data() + spec.labels.size())},
          {"m", spec.m()},
          {"n", spec.n()}};
}

LogisticSpec logistic_from_json(const nlohmann::json& j) {
  const int n = j.at("n").get<int>();
  const int m = j.at("m").get<int>();
  const auto theta = j.at("theta").get<std::vector<double>>();
  const auto labels = j.at("labels").get<std::vector<double>>();
  if (static_cast<long>(theta.size()) != static_cast<long>(n) * m ||
      static_cast<int>(labels.size()) != m) {
    throw std::invalid_argument("logistic JSON sizes are inconsistent");
  }
  LogisticSpec spec;
  spec.theta = Eigen::Map<const Matrix>(theta.data(), n, m);
  spec.labels = Eigen::Map<const Vector>(labels.data(), m);
  return validated(spec);
}

}  // namespace hbreset
