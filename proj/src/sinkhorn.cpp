#include "neuralot/sinkhorn.hpp"

#include <cmath>
#include <limits>

#include "neuralot/errors.hpp"

namespace neuralot {

Vector uniform_weights(Eigen::Index n) {
  require(n > 0, "uniform_weights: n must be positive");
  return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

namespace {

// out_k = -eps * log sum_l exp(offset_l + kernel(l, k)) for each column k of
// `kernel`, where kernel holds -c / eps.
void soft_min_columns(const Matrix& kernel, const Vector& offset, double eps, Vector& out) {
  const Eigen::Index n = kernel.cols();
  Eigen::ArrayXd tmp(kernel.rows());
  for (Eigen::Index k = 0; k < n; ++k) {
    tmp = kernel.col(k).array() + offset.array();
    const double m = tmp.maxCoeff();
    if (!std::isfinite(m)) throw NumericalError("sinkhorn_log: non-finite log-sum-exp");
    const double s = (tmp - m).exp().sum();
    out[k] = -eps * (m + std::log(s));
  }
}

void check_weights(const Vector& w, const char* name) {
  require(w.size() > 0, std::string("sinkhorn_log: empty weight vector ") + name);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    require(w[i] > 0.0 && std::isfinite(w[i]),
            std::string("sinkhorn_log: weights ") + name + " must be strictly positive");
  }
}

// Plain Sinkhorn slows to a crawl when eps is small against the cost gaps.
// Every kPolishEvery sweeps we try Newton steps on the row potential with
// the column potential eliminated; they converge quadratically near the
// optimum. Too expensive beyond kPolishMaxRows rows.
constexpr int kPolishEvery = 1000;
constexpr Eigen::Index kPolishMaxRows = 1200;

// Column-exact v for the given u, the resulting plan, and its L1 row error.
double column_exact_plan(const Matrix& kernel, const Vector& log_a, const Vector& log_b,
                         const Vector& u, double eps, Vector& v, Matrix& plan) {
  const Vector fa = log_a + u / eps;
  soft_min_columns(kernel, fa, eps, v);
  plan.resize(kernel.rows(), kernel.cols());
  for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
    plan.col(j) = (kernel.col(j).array() + fa.array() + (log_b[j] + v[j] / eps)).exp();
  }
  return (plan.rowwise().sum() - log_a.array().exp().matrix()).lpNorm<1>();
}

// Returns true once the row error is within tolerance; u and v are then a
// consistent column-exact pair. Gives up (leaving u improved or unchanged)
// when a step cannot reduce the error.
bool newton_polish(const Matrix& kernel, const Vector& log_a, const Vector& log_b, double eps,
                   const SinkhornConfig& config, int& it, Vector& u, Vector& v) {
  const Eigen::Index n = kernel.rows();
  const Vector a = log_a.array().exp();
  const Vector inv_b = (-log_b.array()).exp();
  Matrix plan, trial_plan;
  Vector trial_u(n), trial_v(v.size());
  double err = column_exact_plan(kernel, log_a, log_b, u, eps, v, plan);
  while (true) {
    if (!std::isfinite(err)) return false;
    if (err <= config.tolerance) return true;
    if (it >= config.max_iterations) return false;
    const Vector rows = plan.rowwise().sum();
    // Jacobian of the row sums in u / eps; its null space is the constant
    // vector, which the rank-one term removes (the residual sums to zero).
    Matrix S = -(plan * inv_b.asDiagonal() * plan.transpose());
    S.diagonal() += rows;
    S.array() += 1.0 / static_cast<double>(n);
    const Vector step = S.ldlt().solve(a - rows);
    if (!step.allFinite()) return false;
    bool accepted = false;
    for (double t = 1.0; t > 1e-9; t *= 0.5) {
      trial_u = u + (eps * t) * step;
      const double e = column_exact_plan(kernel, log_a, log_b, trial_u, eps, trial_v, trial_plan);
      if (std::isfinite(e) && e < err) {
        u.swap(trial_u);
        v.swap(trial_v);
        plan.swap(trial_plan);
        err = e;
        accepted = true;
        break;
      }
    }
    if (!accepted) return false;
    ++it;
  }
}

}  // namespace

DiscreteOtSolution sinkhorn_log(const CostMatrix& cost, const Vector& a, const Vector& b,
                                const SinkhornConfig& config) {
  check_weights(a, "a");
  check_weights(b, "b");
  require(cost.rows() == a.size() && cost.cols() == b.size(),
          "sinkhorn_log: cost shape does not match weights");
  require(config.epsilon > 0.0, "sinkhorn_log: epsilon must be positive");
  require(config.max_iterations >= 1, "sinkhorn_log: max_iterations must be >= 1");
  require(config.tolerance > 0.0, "sinkhorn_log: tolerance must be positive");
  if (!cost.allFinite()) throw PreconditionError("sinkhorn_log: cost matrix is not finite");

  const double eps = config.epsilon;
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  // Column passes read kernel, row passes read its transpose: both contiguous.
  const Matrix kernel = -cost / eps;
  const Matrix kernel_t = kernel.transpose();
  const Vector log_a = a.array().log();
  const Vector log_b = b.array().log();

  Vector u = Vector::Zero(n);
  if (config.warm_start) {
    require(config.warm_start->u.size() == n && config.warm_start->v.size() == m,
            "sinkhorn_log: warm start has wrong length");
    u = config.warm_start->u;
  }
  Vector v(m);
  Vector u_next(n);

  DiscreteOtSolution sol;
  sol.epsilon = eps;
  sol.epsilon_below_recommended = eps < kMinRecommendedEpsilon;

  for (int it = 1; it <= config.max_iterations; ++it) {
    // Column update makes the column marginals exact.
    soft_min_columns(kernel, log_a + u / eps, eps, v);
    // The next row update tells us the current row sums for free:
    // row_i = a_i exp((u_i - u_next_i) / eps).
    soft_min_columns(kernel_t, log_b + v / eps, eps, u_next);
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      err += a[i] * std::abs(std::expm1((u[i] - u_next[i]) / eps));
    }
    if (!std::isfinite(err)) throw NumericalError("sinkhorn_log: marginal error is not finite");
    sol.iterations_used = it;
    if (err <= config.tolerance) {
      sol.converged = true;
      break;
    }
    u.swap(u_next);
    if (it % kPolishEvery == 0 && n <= kPolishMaxRows && it < config.max_iterations) {
      if (newton_polish(kernel, log_a, log_b, eps, config, it, u, v)) {
        sol.iterations_used = it;
        sol.converged = true;
        break;
      }
      sol.iterations_used = it;
    }
  }
  if (!sol.converged) {
    // Finish on a column update so the returned pair is consistent.
    soft_min_columns(kernel, log_a + u / eps, eps, v);
  }

  const double shift = u.mean();
  u.array() -= shift;
  v.array() += shift;

  sol.plan.resize(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    sol.plan.col(j) = ((u.array() + v[j] - cost.col(j).array()) / eps).exp() * a.array() * b[j];
  }
  if (!sol.plan.allFinite()) throw NumericalError("sinkhorn_log: plan is not finite");
  sol.marginal_error = (sol.plan.rowwise().sum() - a).lpNorm<1>() +
                       (sol.plan.colwise().sum().transpose() - b).lpNorm<1>();
  sol.u_hat = std::move(u);
  sol.v_hat = std::move(v);
  return sol;
}

std::vector<Point2> barycentric_map(const Matrix& plan, const Vector& a, const SampleBatch& Y) {
  require(plan.rows() == a.size(), "barycentric_map: plan rows do not match weights");
  require(plan.cols() == static_cast<Eigen::Index>(Y.size()),
          "barycentric_map: plan columns do not match target batch");
  std::vector<Point2> out(static_cast<std::size_t>(plan.rows()));
  const Matrix ym = to_matrix(Y);
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    if (plan.row(i).sum() <= 0.0) {
      throw PreconditionError("barycentric_map: zero row sum at source " + std::to_string(i));
    }
    require(a[i] > 0.0, "barycentric_map: source weight must be positive");
    const Eigen::Vector2d t = ym * plan.row(i).transpose() / a[i];
    out[static_cast<std::size_t>(i)] = {t[0], t[1]};
  }
  return out;
}

}  // namespace neuralot
