#include "neuralot/geometry.hpp"

#include <cmath>
#include <numbers>

#include "neuralot/errors.hpp"

namespace neuralot {

std::string_view to_string(BatchRole role) {
  switch (role) {
    case BatchRole::Source:
      return "src";
    case BatchRole::Target:
      return "tgt";
    case BatchRole::Mapped:
      return "map";
  }
  return "?";
}

double squared_euclidean_cost(const Point2& a, const Point2& b) {
  const double d0 = a.x0 - b.x0;
  const double d1 = a.x1 - b.x1;
  return d0 * d0 + d1 * d1;
}

CostMatrix cost_matrix(const SampleBatch& X, const SampleBatch& Y) {
  require(!X.empty() && !Y.empty(), "cost_matrix: batches must be non-empty");
  CostMatrix c(X.size(), Y.size());
  for (std::size_t j = 0; j < Y.size(); ++j) {
    for (std::size_t i = 0; i < X.size(); ++i) {
      c(i, j) = squared_euclidean_cost(X[i], Y[j]);
    }
  }
  return c;
}

CostMatrix cost_matrix(const Matrix& X, const Matrix& Y) {
  require(X.cols() > 0 && Y.cols() > 0, "cost_matrix: batches must be non-empty");
  require(X.rows() == Y.rows(), "cost_matrix: dimension mismatch");
  CostMatrix c(X.cols(), Y.cols());
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
      c(i, j) = (X.col(i) - Y.col(j)).squaredNorm();
    }
  }
  return c;
}

namespace {

Point2 sample_disk(Rng& rng, double radius) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double r = radius * std::sqrt(unif(rng));
  const double theta = 2.0 * std::numbers::pi * unif(rng);
  return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace

SampleBatch sample_unit_ball(std::size_t n, Rng& rng) {
  SampleBatch batch{{}, BatchRole::Source};
  batch.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) batch.points.push_back(sample_disk(rng, 1.0));
  return batch;
}

SampleBatch sample_four_balls(std::size_t n, Rng& rng) {
  SampleBatch batch{{}, BatchRole::Target};
  batch.points.reserve(n);
  std::uniform_int_distribution<int> pick(0, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& c = kFourBallsCenters[pick(rng)];
    const Point2 p = sample_disk(rng, kFourBallsRadius);
    batch.points.push_back({c.x0 + p.x0, c.x1 + p.x1});
  }
  return batch;
}

Matrix to_matrix(const SampleBatch& batch) {
  Matrix m(2, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    m(0, i) = batch[i].x0;
    m(1, i) = batch[i].x1;
  }
  return m;
}

SampleBatch from_matrix(const Matrix& m, BatchRole role) {
  require(m.rows() == 2, "from_matrix: expected 2 rows");
  SampleBatch batch{{}, role};
  batch.points.reserve(m.cols());
  for (Eigen::Index i = 0; i < m.cols(); ++i) batch.points.push_back({m(0, i), m(1, i)});
  return batch;
}

bool all_finite(const SampleBatch& batch) {
  for (const auto& p : batch.points) {
    if (!std::isfinite(p.x0) || !std::isfinite(p.x1)) return false;
  }
  return true;
}

}  // namespace neuralot
