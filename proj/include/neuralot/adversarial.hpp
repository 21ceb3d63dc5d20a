#pragma once

#include <optional>

#include "neuralot/training.hpp"

namespace neuralot {

struct AdversarialConfig {
  double lambda = 1.0;
  // Critic (gradient-ascent) steps per map step. The registry suffix "_N"
  // means N - 1 of them.
  int critic_steps = 1;
  // Element-wise clipping of the critic gradient only.
  std::optional<double> clip_threshold;
};

struct AdversarialObjective {
  double map_loss = 0.0;      // cost + lambda * critic_value
  double cost = 0.0;          // mean c(X_i, T(X_i))
  double critic_value = 0.0;  // mean f(T(X_i)) - mean f(Y_j)
};

AdversarialObjective adversarial_objective(const SampleBatch& X, const SampleBatch& Y,
                                           const Mlp& map, const Mlp& critic, double lambda);

struct AdversarialGradients {
  AdversarialObjective objective;
  GradientVector map_grad;     // d map_loss / d w
  GradientVector critic_grad;  // d (-lambda * critic_value) / d theta (descent direction)
};

// Objective with the requested parameter gradients, shared forward passes.
AdversarialGradients adversarial_gradients(const Matrix& X, const Matrix& Y, const Mlp& map,
                                           const Mlp& critic, double lambda,
                                           bool need_map_grad = true, bool need_critic_grad = true);

struct AdversarialResult {
  Mlp map;
  Mlp critic;
  EvalReport report;
  // Per map step: map_loss, cost, adversarial.
  LossTrace trace;
};

// Alternates `critic_steps` ascent steps on the critic (fresh batches each)
// with one descent step on the map.
AdversarialResult train_adversarial(const AdversarialConfig& config, const TrainSettings& settings,
                                    Rng& rng, Recorder& recorder);

}  // namespace neuralot
