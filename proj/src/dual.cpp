#include "neuralot/dual.hpp"

#include <cmath>

#include "neuralot/errors.hpp"

namespace neuralot {

std::string_view to_string(Regularization r) { return r == Regularization::Entropic ? "ent" : "l2"; }
std::string_view to_string(Aggregation a) { return a == Aggregation::Mean ? "mean" : "sum"; }

Regularization regularization_from_string(std::string_view s) {
  if (s == "ent" || s == "entropic") return Regularization::Entropic;
  if (s == "l2") return Regularization::L2;
  throw ConfigError("unknown regularization '" + std::string(s) + "' (expected ent|l2)");
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "mean") return Aggregation::Mean;
  if (s == "sum") return Aggregation::Sum;
  throw ConfigError("unknown aggregation '" + std::string(s) + "' (expected mean|sum)");
}

namespace {

void check_dual_inputs(const Vector& u, const Vector& v, const CostMatrix& cost, double eps) {
  require(u.size() > 0 && v.size() > 0, "dual loss: empty batch");
  require(cost.rows() == u.size() && cost.cols() == v.size(), "dual loss: shape mismatch");
  require(eps > 0.0, "dual loss: epsilon must be positive");
}

double aggregation_scale(Aggregation agg, Eigen::Index nx, Eigen::Index ny) {
  return agg == Aggregation::Mean ? 1.0 / (static_cast<double>(nx) * static_cast<double>(ny))
                                  : 1.0 / static_cast<double>(nx);
}

}  // namespace

DualLoss entropic_dual_batch_loss(const Vector& u, const Vector& v, const CostMatrix& cost,
                                  double epsilon, Aggregation aggregation) {
  check_dual_inputs(u, v, cost, epsilon);
  const Eigen::Index nx = u.size();
  const Eigen::Index ny = v.size();
  const double scale = aggregation_scale(aggregation, nx, ny);
  Matrix s = (-cost).colwise() + u;
  s.rowwise() += v.transpose();
  s /= epsilon;
  const double m = s.maxCoeff();
  if (!std::isfinite(m)) throw NumericalError("entropic dual loss: non-finite exponent");
  // exp(s) = exp(m) * exp(s - m); the sum is formed in the shifted domain.
  const Matrix e = (s.array() - m).exp();
  const double log_penalty = m + std::log(e.sum() * scale * epsilon);
  DualLoss out;
  out.penalty = std::exp(log_penalty);
  out.value = -(u.mean() + v.mean() - out.penalty);
  if (!std::isfinite(out.value)) throw NumericalError("entropic dual loss is not finite");
  const double w = scale * std::exp(m);
  out.grad_u = (w * e.rowwise().sum()).array() - 1.0 / static_cast<double>(nx);
  out.grad_v = (w * e.colwise().sum().transpose()).array() - 1.0 / static_cast<double>(ny);
  if (!out.grad_u.allFinite() || !out.grad_v.allFinite()) {
    throw NumericalError("entropic dual loss gradient is not finite");
  }
  return out;
}

DualLoss l2_dual_batch_loss(const Vector& u, const Vector& v, const CostMatrix& cost,
                            double epsilon, Aggregation aggregation) {
  check_dual_inputs(u, v, cost, epsilon);
  const Eigen::Index nx = u.size();
  const Eigen::Index ny = v.size();
  const double scale = aggregation_scale(aggregation, nx, ny);
  Matrix s = (-cost).colwise() + u;
  s.rowwise() += v.transpose();
  const Matrix pos = s.cwiseMax(0.0);
  DualLoss out;
  out.penalty = scale / (4.0 * epsilon) * pos.squaredNorm();
  out.value = -(u.mean() + v.mean() - out.penalty);
  if (!std::isfinite(out.value)) throw NumericalError("l2 dual loss is not finite");
  const double w = scale / (2.0 * epsilon);
  out.grad_u = (w * pos.rowwise().sum()).array() - 1.0 / static_cast<double>(nx);
  out.grad_v = (w * pos.colwise().sum().transpose()).array() - 1.0 / static_cast<double>(ny);
  return out;
}

DualLoss dual_batch_loss(Regularization reg, const Vector& u, const Vector& v,
                         const CostMatrix& cost, double epsilon, Aggregation aggregation) {
  return reg == Regularization::Entropic
             ? entropic_dual_batch_loss(u, v, cost, epsilon, aggregation)
             : l2_dual_batch_loss(u, v, cost, epsilon, aggregation);
}

double plan_density_entropic(double u, double v, double c, double epsilon) {
  require(epsilon > 0.0, "plan_density_entropic: epsilon must be positive");
  return std::exp((u + v - c) / epsilon);
}

double plan_density_l2(double u, double v, double c, double epsilon) {
  require(epsilon > 0.0, "plan_density_l2: epsilon must be positive");
  return std::max(u + v - c, 0.0) / (2.0 * epsilon);
}

ConditionalWeights conditional_weights(Regularization reg, const Vector& u, const Vector& v,
                                       const CostMatrix& cost, double epsilon) {
  check_dual_inputs(u, v, cost, epsilon);
  ConditionalWeights out;
  out.empty_rows.assign(static_cast<std::size_t>(u.size()), false);
  if (reg == Regularization::Entropic) {
    // Softmax over j of (v_j - c_ij) / eps; u_i cancels in the normalization.
    Matrix s = (-cost).rowwise() + v.transpose();
    s /= epsilon;
    const Vector m = s.rowwise().maxCoeff();
    out.weights = (s.colwise() - m).array().exp();
    const Vector z = out.weights.rowwise().sum();
    out.weights.array().colwise() /= z.array();
    return out;
  }
  Matrix s = (-cost).colwise() + u;
  s.rowwise() += v.transpose();
  out.weights = s.cwiseMax(0.0);
  for (Eigen::Index i = 0; i < out.weights.rows(); ++i) {
    const double z = out.weights.row(i).sum();
    if (z > 0.0) {
      out.weights.row(i) /= z;
    } else {
      out.empty_rows[static_cast<std::size_t>(i)] = true;
    }
  }
  return out;
}

BarycentricLoss barycentric_regression_loss(const Matrix& TX, const Matrix& Y,
                                            const ConditionalWeights& w) {
  require(w.weights.rows() == TX.cols() && w.weights.cols() == Y.cols(),
          "barycentric_regression_loss: weight shape mismatch");
  BarycentricLoss out;
  out.grad = Matrix::Zero(2, TX.cols());
  const Matrix bary = Y * w.weights.transpose();  // 2 x n
  const Vector y_sq = Y.colwise().squaredNorm().transpose();
  for (Eigen::Index i = 0; i < TX.cols(); ++i) {
    if (w.empty_rows[static_cast<std::size_t>(i)]) continue;
    ++out.used_rows;
    // sum_j W_ij |t - y_j|^2 = |t|^2 - 2 t.bary_i + sum_j W_ij |y_j|^2
    out.value += TX.col(i).squaredNorm() - 2.0 * TX.col(i).dot(bary.col(i)) +
                 w.weights.row(i).dot(y_sq);
    out.grad.col(i) = 2.0 * (TX.col(i) - bary.col(i));
  }
  if (out.used_rows > 0) {
    const double inv = 1.0 / static_cast<double>(out.used_rows);
    out.value *= inv;
    out.grad *= inv;
  }
  return out;
}

DualTrainResult train_dual(const DualConfig& config, const TrainSettings& settings, Rng& rng) {
  require(config.epsilon > 0.0, "train_dual: epsilon must be positive");
  const auto& net = settings.network;
  DualTrainResult out{init_zero_potential(net.hidden_dims, net.activation, rng),
                      init_zero_potential(net.hidden_dims, net.activation, rng),
                      {},
                      0.0};
  Optimizer opt_u(settings.optimizer, out.u.num_params());
  Optimizer opt_v(settings.optimizer, out.v.num_params());
  Stopwatch clock;
  clock.start();
  for (std::int64_t t = 1; t <= config.dual_iterations; ++t) {
    const Matrix X = to_matrix(draw_source(settings.batch_x, rng));
    const Matrix Y = to_matrix(draw_target(settings.batch_y, rng));
    const CostMatrix c = cost_matrix(X, Y);
    ForwardCache cu;
    ForwardCache cv;
    const Vector u_vals = out.u.forward(X, cu).row(0).transpose();
    const Vector v_vals = out.v.forward(Y, cv).row(0).transpose();
    const DualLoss loss =
        dual_batch_loss(config.regularization, u_vals, v_vals, c, config.epsilon, config.aggregation);
    opt_u.step(out.u, out.u.backward(cu, loss.grad_u.transpose()).params, "dual loss (u)");
    opt_v.step(out.v, out.v.backward(cv, loss.grad_v.transpose()).params, "dual loss (v)");
    out.trace.push({{"loss", loss.value}, {"penalty", loss.penalty}});
  }
  clock.stop();
  out.secs = clock.seconds();
  return out;
}

MapFitResult fit_map_from_weights(const WeightSource& source, const TrainSettings& settings,
                                  std::int64_t iterations, Rng& rng, Recorder& recorder) {
  const auto& net = settings.network;
  MapFitResult out{init_identity_map(net.hidden_dims, net.activation, rng), {}, 0};
  Optimizer opt(settings.optimizer, out.map.num_params());
  const MapFunction map_fn = as_map_function(out.map);
  recorder.start();
  if (recorder.due(0)) recorder.record(0, map_fn, {});
  for (std::int64_t t = 1; t <= iterations; ++t) {
    const Matrix X = to_matrix(draw_source(settings.batch_x, rng));
    const Matrix Y = to_matrix(draw_target(settings.batch_y, rng));
    const ConditionalWeights w = source(X, Y);
    ForwardCache cache;
    const Matrix tx = out.map.forward(X, cache);
    const BarycentricLoss loss = barycentric_regression_loss(tx, Y, w);
    out.skipped_rows += X.cols() - loss.used_rows;
    if (loss.used_rows > 0) {
      opt.step(out.map, out.map.backward(cache, loss.grad).params, "map fitting loss");
    }
    if (recorder.due(t)) {
      recorder.record(t, map_fn,
                      {{"map_loss", loss.value}, {"used_rows", static_cast<double>(loss.used_rows)}});
    }
  }
  recorder.counters()["skipped_rows"] = out.skipped_rows;
  out.report = recorder.finish();
  return out;
}

MapFitResult fit_map_from_potentials(const Mlp& u, const Mlp& v, Regularization reg,
                                     double epsilon, const TrainSettings& settings,
                                     std::int64_t iterations, Rng& rng, Recorder& recorder) {
  const WeightSource source = [&](const Matrix& X, const Matrix& Y) {
    const Vector uv = u.forward(X).row(0).transpose();
    const Vector vv = v.forward(Y).row(0).transpose();
    return conditional_weights(reg, uv, vv, cost_matrix(X, Y), epsilon);
  };
  return fit_map_from_weights(source, settings, iterations, rng, recorder);
}

}  // namespace neuralot
