#pragma once

#include <string>
#include <variant>
#include <vector>

#include "neuralot/training.hpp"

namespace neuralot {

// Value of a loss of the mapped points plus its gradient with respect to them
// (2 x b_X, same layout as the mapped batch).
struct PointLoss {
  double value = 0.0;
  Matrix grad;
};

// Feature-mean matching with the monomials {x0, x1, x0^2, x1^2, x0 x1}.
struct CovarianceFeatures {};

// Feature-mean matching with f_k(y) = exp(-|y - z_k|^2 / sigma^2).
struct GaussianBumpFeatures {
  std::vector<Point2> centers;
  double sigma = 0.5;
};

// Mean distance from each mapped point to its k nearest targets.
struct Discrepancy {
  int k = 1;
};

// Discrepancy plus the reverse direction (targets to mapped points).
struct SymmetricDiscrepancy {
  int k = 1;
};

using FlowFeature = std::variant<CovarianceFeatures, GaussianBumpFeatures, Discrepancy,
                                 SymmetricDiscrepancy>;

struct FlowLossKind {
  FlowFeature feature;
  bool with_transport_cost = false;
};

// n x n grid of centres on [lo, hi]^2.
std::vector<Point2> bump_grid(int n = 9, double lo = -2.0, double hi = 2.0);

PointLoss covariance_loss(const Matrix& TX, const Matrix& Y);
PointLoss gaussian_bump_loss(const Matrix& TX, const Matrix& Y, const std::vector<Point2>& centers,
                             double sigma);
PointLoss discrepancy_at_k(const Matrix& TX, const Matrix& Y, int k);
PointLoss sym_discrepancy_at_k(const Matrix& TX, const Matrix& Y, int k);

// SampleBatch conveniences returning only the value.
double covariance_loss(const SampleBatch& TX, const SampleBatch& Y);
double gaussian_bump_loss(const SampleBatch& TX, const SampleBatch& Y,
                          const std::vector<Point2>& centers, double sigma);
double discrepancy_at_k(const SampleBatch& TX, const SampleBatch& Y, int k);
double sym_discrepancy_at_k(const SampleBatch& TX, const SampleBatch& Y, int k);

// Indices (k x n_query) of the k nearest reference columns for each query
// column, Euclidean distance, ties broken by the smaller index.
Eigen::MatrixXi nearest_neighbors(const Matrix& query, const Matrix& reference, int k);

// Mean |X_i - TX_i|^2 and its gradient with respect to TX.
PointLoss transport_cost_term(const Matrix& X, const Matrix& TX);

struct FlowLossResult {
  double loss = 0.0;
  double base = 0.0;
  double transport_cost = 0.0;
  GradientVector grad;
};

// Lagrangian of the mapped batch against Y, optionally plus the mean
// transport cost, with the exact gradient with respect to the map weights.
// Discrepancy gradients hold the neighbour assignment fixed.
FlowLossResult flow_loss(const SampleBatch& X, const Mlp& model, const SampleBatch& Y,
                         const FlowLossKind& kind);

struct FlowConfig {
  FlowLossKind loss;
};

struct FlowResult {
  Mlp map;
  EvalReport report;
};

// Gradient flow of an identity-initialized map network on fresh batches.
FlowResult train_flow(const FlowConfig& config, const TrainSettings& settings, Rng& rng,
                      Recorder& recorder);

}  // namespace neuralot
