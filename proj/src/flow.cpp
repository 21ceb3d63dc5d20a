#include "neuralot/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neuralot/errors.hpp"

namespace neuralot {

std::vector<Point2> bump_grid(int n, double lo, double hi) {
  require(n >= 1, "bump_grid: n must be >= 1");
  std::vector<Point2> centers;
  centers.reserve(static_cast<std::size_t>(n * n));
  const double step = n > 1 ? (hi - lo) / (n - 1) : 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) centers.push_back({lo + i * step, lo + j * step});
  }
  return centers;
}

namespace {

void check_batches(const Matrix& TX, const Matrix& Y, const char* who) {
  require(TX.rows() == 2 && Y.rows() == 2, std::string(who) + ": expected 2D points");
  require(TX.cols() > 0 && Y.cols() > 0, std::string(who) + ": batches must be non-empty");
}

// Monomials x0, x1, x0^2, x1^2, x0 x1 of every column.
Eigen::Matrix<double, 5, Eigen::Dynamic> monomials(const Matrix& P) {
  Eigen::Matrix<double, 5, Eigen::Dynamic> f(5, P.cols());
  f.row(0) = P.row(0);
  f.row(1) = P.row(1);
  f.row(2) = P.row(0).array().square();
  f.row(3) = P.row(1).array().square();
  f.row(4) = P.row(0).array() * P.row(1).array();
  return f;
}

// exp(-|p - z_k|^2 / sigma^2), K x n.
Matrix bump_features(const Matrix& P, const std::vector<Point2>& centers, double sigma) {
  const double inv = 1.0 / (sigma * sigma);
  Matrix f(static_cast<Eigen::Index>(centers.size()), P.cols());
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto d0 = P.row(0).array() - centers[k].x0;
    const auto d1 = P.row(1).array() - centers[k].x1;
    f.row(static_cast<Eigen::Index>(k)) = (-(d0.square() + d1.square()) * inv).exp();
  }
  return f;
}

}  // namespace

PointLoss covariance_loss(const Matrix& TX, const Matrix& Y) {
  check_batches(TX, Y, "covariance_loss");
  const auto ftx = monomials(TX);
  const Eigen::Matrix<double, 5, 1> diff = ftx.rowwise().mean() - monomials(Y).rowwise().mean();
  PointLoss out;
  out.value = diff.squaredNorm();
  const double scale = 2.0 / static_cast<double>(TX.cols());
  out.grad.resize(2, TX.cols());
  for (Eigen::Index i = 0; i < TX.cols(); ++i) {
    const double x0 = TX(0, i);
    const double x1 = TX(1, i);
    out.grad(0, i) = scale * (diff[0] + 2.0 * x0 * diff[2] + x1 * diff[4]);
    out.grad(1, i) = scale * (diff[1] + 2.0 * x1 * diff[3] + x0 * diff[4]);
  }
  return out;
}

PointLoss gaussian_bump_loss(const Matrix& TX, const Matrix& Y, const std::vector<Point2>& centers,
                             double sigma) {
  check_batches(TX, Y, "gaussian_bump_loss");
  require(sigma > 0.0, "gaussian_bump_loss: sigma must be positive");
  require(!centers.empty(), "gaussian_bump_loss: need at least one centre");
  const Matrix ftx = bump_features(TX, centers, sigma);
  const Vector diff = ftx.rowwise().mean() - bump_features(Y, centers, sigma).rowwise().mean();
  PointLoss out;
  out.value = diff.squaredNorm();
  // d/dp f_k(p) = -2 (p - z_k) / sigma^2 f_k(p)
  const Matrix w = ftx.array().colwise() * diff.array();  // K x n
  const double scale = 2.0 / static_cast<double>(TX.cols()) * (-2.0 / (sigma * sigma));
  out.grad.resize(2, TX.cols());
  Vector zx(static_cast<Eigen::Index>(centers.size()));
  Vector zy(zx.size());
  for (std::size_t k = 0; k < centers.size(); ++k) {
    zx[static_cast<Eigen::Index>(k)] = centers[k].x0;
    zy[static_cast<Eigen::Index>(k)] = centers[k].x1;
  }
  const Eigen::RowVectorXd wsum = w.colwise().sum();
  out.grad.row(0) = scale * (TX.row(0).array() * wsum.array() - (zx.transpose() * w).array());
  out.grad.row(1) = scale * (TX.row(1).array() * wsum.array() - (zy.transpose() * w).array());
  return out;
}

Eigen::MatrixXi nearest_neighbors(const Matrix& query, const Matrix& reference, int k) {
  require(k >= 1, "nearest_neighbors: k must be >= 1");
  require(k <= reference.cols(), "nearest_neighbors: k = " + std::to_string(k) +
                                     " exceeds reference size " +
                                     std::to_string(reference.cols()));
  const Matrix d2 = cost_matrix(query, reference);
  Eigen::MatrixXi idx(k, query.cols());
  std::vector<int> order(static_cast<std::size_t>(reference.cols()));
  for (Eigen::Index q = 0; q < query.cols(); ++q) {
    std::iota(order.begin(), order.end(), 0);
    auto closer = [&](int a, int b) {
      const double da = d2(q, a);
      const double db = d2(q, b);
      return da < db || (da == db && a < b);
    };
    if (k == 1) {
      idx(0, q) = *std::min_element(order.begin(), order.end(), closer);
    } else {
      std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
      for (int l = 0; l < k; ++l) idx(l, q) = order[static_cast<std::size_t>(l)];
    }
  }
  return idx;
}

namespace {

// Adds sum_{l<=k} |TX_i - Y_{nn(i)}| / n_i terms. When `from_targets` is set,
// the neighbours are searched from each target among the mapped points.
void add_directional_discrepancy(const Matrix& TX, const Matrix& Y, int k, bool from_targets,
                                 PointLoss& out) {
  const Matrix& query = from_targets ? Y : TX;
  const Matrix& ref = from_targets ? TX : Y;
  const Eigen::MatrixXi nn = nearest_neighbors(query, ref, k);
  const double inv_n = 1.0 / static_cast<double>(query.cols());
  double total = 0.0;
  for (Eigen::Index q = 0; q < query.cols(); ++q) {
    for (int l = 0; l < k; ++l) {
      const Eigen::Index r = nn(l, q);
      const Eigen::Index i = from_targets ? r : q;  // mapped-point index
      const Eigen::Index j = from_targets ? q : r;  // target index
      const Eigen::Vector2d delta = TX.col(i) - Y.col(j);
      const double d = delta.norm();
      total += d;
      if (d > 0.0) out.grad.col(i) += inv_n * delta / d;
    }
  }
  out.value += total * inv_n;
}

}  // namespace

PointLoss discrepancy_at_k(const Matrix& TX, const Matrix& Y, int k) {
  check_batches(TX, Y, "discrepancy_at_k");
  PointLoss out;
  out.grad = Matrix::Zero(2, TX.cols());
  add_directional_discrepancy(TX, Y, k, false, out);
  return out;
}

PointLoss sym_discrepancy_at_k(const Matrix& TX, const Matrix& Y, int k) {
  check_batches(TX, Y, "sym_discrepancy_at_k");
  require(k <= TX.cols(), "sym_discrepancy_at_k: k exceeds mapped batch size");
  PointLoss out;
  out.grad = Matrix::Zero(2, TX.cols());
  add_directional_discrepancy(TX, Y, k, false, out);
  add_directional_discrepancy(TX, Y, k, true, out);
  return out;
}

double covariance_loss(const SampleBatch& TX, const SampleBatch& Y) {
  return covariance_loss(to_matrix(TX), to_matrix(Y)).value;
}

double gaussian_bump_loss(const SampleBatch& TX, const SampleBatch& Y,
                          const std::vector<Point2>& centers, double sigma) {
  return gaussian_bump_loss(to_matrix(TX), to_matrix(Y), centers, sigma).value;
}

double discrepancy_at_k(const SampleBatch& TX, const SampleBatch& Y, int k) {
  return discrepancy_at_k(to_matrix(TX), to_matrix(Y), k).value;
}

double sym_discrepancy_at_k(const SampleBatch& TX, const SampleBatch& Y, int k) {
  return sym_discrepancy_at_k(to_matrix(TX), to_matrix(Y), k).value;
}

PointLoss transport_cost_term(const Matrix& X, const Matrix& TX) {
  require(X.rows() == TX.rows() && X.cols() == TX.cols() && X.cols() > 0,
          "transport_cost_term: shape mismatch");
  const Matrix delta = TX - X;
  const double inv_n = 1.0 / static_cast<double>(X.cols());
  return {delta.squaredNorm() * inv_n, 2.0 * inv_n * delta};
}

FlowLossResult flow_loss(const SampleBatch& X, const Mlp& model, const SampleBatch& Y,
                         const FlowLossKind& kind) {
  const Matrix xm = to_matrix(X);
  const Matrix ym = to_matrix(Y);
  ForwardCache cache;
  const Matrix tx = model.forward(xm, cache);
  PointLoss base = std::visit(
      [&](const auto& f) -> PointLoss {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, CovarianceFeatures>) {
          return covariance_loss(tx, ym);
        } else if constexpr (std::is_same_v<F, GaussianBumpFeatures>) {
          return gaussian_bump_loss(tx, ym, f.centers, f.sigma);
        } else if constexpr (std::is_same_v<F, Discrepancy>) {
          return discrepancy_at_k(tx, ym, f.k);
        } else {
          return sym_discrepancy_at_k(tx, ym, f.k);
        }
      },
      kind.feature);
  FlowLossResult out;
  out.base = base.value;
  out.loss = base.value;
  if (kind.with_transport_cost) {
    const PointLoss cost = transport_cost_term(xm, tx);
    out.transport_cost = cost.value;
    out.loss += cost.value;
    base.grad += cost.grad;
  }
  out.grad = model.backward(cache, base.grad).params;
  return out;
}

FlowResult train_flow(const FlowConfig& config, const TrainSettings& settings, Rng& rng,
                      Recorder& recorder) {
  require(settings.batch_x > 0 && settings.batch_y > 0, "train_flow: batch sizes must be > 0");
  Mlp model = init_identity_map(settings.network.hidden_dims, settings.network.activation, rng);
  Optimizer opt(settings.optimizer, model.num_params());
  const MapFunction map = as_map_function(model);

  recorder.start();
  if (recorder.due(0)) recorder.record(0, map, {});
  for (std::int64_t t = 1; t <= settings.iterations; ++t) {
    const SampleBatch X = draw_source(settings.batch_x, rng);
    const SampleBatch Y = draw_target(settings.batch_y, rng);
    const FlowLossResult res = flow_loss(X, model, Y, config.loss);
    if (!std::isfinite(res.loss)) {
      throw NumericalError("flow loss is not finite at step " + std::to_string(t));
    }
    opt.step(model, res.grad, "flow loss");
    if (recorder.due(t)) {
      recorder.record(t, map,
                      {{"loss", res.loss}, {"base", res.base}, {"transport_cost", res.transport_cost}});
    }
  }
  return {std::move(model), recorder.finish()};
}

}  // namespace neuralot
