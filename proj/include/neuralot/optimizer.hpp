#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "neuralot/mlp.hpp"

namespace neuralot {

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Element-wise value clipping to [-c, c] before the update.
  std::optional<double> clip_threshold;
};

// First-order optimizer state bound to one parameter vector length.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, Eigen::Index num_params);

  // Applies one update to `model`. Throws NumericalError naming `loss_name`
  // if the gradient has a non-finite entry. Returns the gradient actually
  // applied (after clipping).
  const GradientVector& step(Mlp& model, const GradientVector& grad,
                             std::string_view loss_name = "loss");

  const OptimizerConfig& config() const { return config_; }
  std::int64_t steps() const { return step_count_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

 private:
  OptimizerConfig config_;
  Vector m_;
  Vector v_;
  GradientVector applied_;
  std::int64_t step_count_ = 0;
};

}  // namespace neuralot
