#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace neuralot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// All randomness in the library flows through one generator type so that a
// seed pins every sample, initialization and batch.
using Rng = std::mt19937_64;

struct Point2 {
  double x0 = 0.0;
  double x1 = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

enum class BatchRole { Source, Target, Mapped };

std::string_view to_string(BatchRole role);

struct SampleBatch {
  std::vector<Point2> points;
  BatchRole role = BatchRole::Source;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point2& operator[](std::size_t i) const { return points[i]; }
};

// Dense b_X x b_Y matrix of pairwise costs.
using CostMatrix = Matrix;

double squared_euclidean_cost(const Point2& a, const Point2& b);

// entries(i, j) = |X_i - Y_j|^2. Throws PreconditionError on an empty batch.
CostMatrix cost_matrix(const SampleBatch& X, const SampleBatch& Y);

// Same, for points stored column-wise (2 x n, 2 x m).
CostMatrix cost_matrix(const Matrix& X, const Matrix& Y);

// Uniform on the closed unit disk (polar method, radius sqrt(U)).
SampleBatch sample_unit_ball(std::size_t n, Rng& rng);

// Equal-weight mixture of disks of radius 1/2 centred at (+-1, +-1).
SampleBatch sample_four_balls(std::size_t n, Rng& rng);

inline constexpr double kFourBallsRadius = 0.5;
inline constexpr Point2 kFourBallsCenters[4] = {{1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}};

// Column-major 2 x n view used by the network code.
Matrix to_matrix(const SampleBatch& batch);
SampleBatch from_matrix(const Matrix& m, BatchRole role);

bool all_finite(const SampleBatch& batch);

}  // namespace neuralot
