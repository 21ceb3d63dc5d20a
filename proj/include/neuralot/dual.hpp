#pragma once

#include <functional>
#include <string_view>

#include "neuralot/training.hpp"

namespace neuralot {

enum class Regularization { Entropic, L2 };
// Mean: average over both batch indices. Sum: double sum divided by b_X.
enum class Aggregation { Mean, Sum };

std::string_view to_string(Regularization r);
std::string_view to_string(Aggregation a);
Regularization regularization_from_string(std::string_view s);
Aggregation aggregation_from_string(std::string_view s);

// Batch loss (to minimize) and its gradient with respect to the potential
// values at the batch points.
struct DualLoss {
  double value = 0.0;
  double penalty = 0.0;  // the aggregated regularization term, as subtracted
  Vector grad_u;
  Vector grad_v;
};

// -[mean u + mean v - eps * Agg exp((u_i + v_j - c_ij) / eps)]
DualLoss entropic_dual_batch_loss(const Vector& u, const Vector& v, const CostMatrix& cost,
                                  double epsilon, Aggregation aggregation);

// -[mean u + mean v - (1 / 4 eps) * Agg (u_i + v_j - c_ij)_+^2]
DualLoss l2_dual_batch_loss(const Vector& u, const Vector& v, const CostMatrix& cost,
                            double epsilon, Aggregation aggregation);

DualLoss dual_batch_loss(Regularization reg, const Vector& u, const Vector& v,
                         const CostMatrix& cost, double epsilon, Aggregation aggregation);

// Plan density with respect to the product measure.
double plan_density_entropic(double u, double v, double c, double epsilon);
double plan_density_l2(double u, double v, double c, double epsilon);

// Row-normalized plan weights for a batch: W(i, j) = pi(j | x_i). Rows with
// zero total mass are left at zero and reported through `empty_rows`.
struct ConditionalWeights {
  Matrix weights;
  std::vector<bool> empty_rows;
};

ConditionalWeights conditional_weights(Regularization reg, const Vector& u, const Vector& v,
                                       const CostMatrix& cost, double epsilon);

// Produces conditional weights for the current (X, Y) batch.
using WeightSource = std::function<ConditionalWeights(const Matrix& X, const Matrix& Y)>;

struct DualConfig {
  Regularization regularization = Regularization::Entropic;
  double epsilon = 0.1;
  Aggregation aggregation = Aggregation::Mean;
  // Steps of the potential stage; the map stage runs TrainSettings::iterations.
  std::int64_t dual_iterations = 10000;
  // Load potential checkpoints from the run directory instead of retraining.
  bool reuse_potentials = false;
};

struct DualTrainResult {
  Mlp u;
  Mlp v;
  LossTrace trace;  // loss, penalty per step
  double secs = 0.0;
};

// Joint stochastic minimization over (theta, eta) of the batch dual loss,
// potentials zero-initialized.
DualTrainResult train_dual(const DualConfig& config, const TrainSettings& settings, Rng& rng);

struct MapFitResult {
  Mlp map;
  EvalReport report;
  std::int64_t skipped_rows = 0;
};

// Weighted barycentric regression of an identity-initialized map:
// minimizes (1 / n) sum_i sum_j W_ij |T(X_i) - Y_j|^2 on fresh batches.
// Empty rows are skipped and counted.
MapFitResult fit_map_from_weights(const WeightSource& source, const TrainSettings& settings,
                                  std::int64_t iterations, Rng& rng, Recorder& recorder);

// The same regression with weights from trained potentials.
MapFitResult fit_map_from_potentials(const Mlp& u, const Mlp& v, Regularization reg,
                                     double epsilon, const TrainSettings& settings,
                                     std::int64_t iterations, Rng& rng, Recorder& recorder);

// Per-batch objective and its gradient with respect to the mapped points.
struct BarycentricLoss {
  double value = 0.0;
  Matrix grad;  // 2 x n
  std::int64_t used_rows = 0;
};

BarycentricLoss barycentric_regression_loss(const Matrix& TX, const Matrix& Y,
                                            const ConditionalWeights& w);

}  // namespace neuralot
