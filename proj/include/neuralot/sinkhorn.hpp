#pragma once

#include <optional>
#include <vector>

#include "neuralot/geometry.hpp"

namespace neuralot {

// Below this regularization the log-domain solver still runs, but convergence
// becomes slow and the solution is flagged.
inline constexpr double kMinRecommendedEpsilon = 0.005;

struct WarmStart {
  Vector u;
  Vector v;
};

struct SinkhornConfig {
  double epsilon = 0.01;
  int max_iterations = 10000;
  double tolerance = 1e-6;  // L1 marginal deviation
  std::optional<WarmStart> warm_start;
};

// Entropic OT solution on a discrete pair of measures.
//
// Potentials are in cost units: plan(i, j) = a_i b_j exp((u_i + v_j - c_ij) / eps).
// The gauge is fixed so that mean(u_hat) == 0.
struct DiscreteOtSolution {
  Vector u_hat;
  Vector v_hat;
  Matrix plan;
  double epsilon = 0.0;
  int iterations_used = 0;
  double marginal_error = 0.0;  // |row sums - a|_1 + |col sums - b|_1
  bool converged = false;
  bool epsilon_below_recommended = false;
};

Vector uniform_weights(Eigen::Index n);

// Log-domain Sinkhorn with max-subtracted log-sum-exp. Throws
// PreconditionError on non-positive weights or shape mismatch; a run that
// hits max_iterations returns converged = false.
DiscreteOtSolution sinkhorn_log(const CostMatrix& cost, const Vector& a, const Vector& b,
                                const SinkhornConfig& config);

struct ExactOtResult {
  Matrix plan;
  double cost = 0.0;
  // For the permutation regime, assignment[i] is the target matched to i.
  std::vector<int> assignment;
};

// Exact unregularized OT by enumeration. Uniform square problems with n <= 8
// go through permutations (lexicographically smallest optimum wins); other
// weights need n*m <= 12 and go through basic feasible solutions.
ExactOtResult brute_force_ot(const CostMatrix& cost, const Vector& a, const Vector& b);

// T(x_i) = sum_j plan(i, j) Y_j / a_i. Throws on a zero row.
std::vector<Point2> barycentric_map(const Matrix& plan, const Vector& a, const SampleBatch& Y);

}  // namespace neuralot
