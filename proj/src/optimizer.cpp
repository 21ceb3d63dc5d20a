#include "neuralot/optimizer.hpp"

#include <cmath>
#include <string>

#include "neuralot/errors.hpp"

namespace neuralot {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd|adam)");
}

Optimizer::Optimizer(OptimizerConfig config, Eigen::Index num_params) : config_(config) {
  require(config_.learning_rate > 0.0, "Optimizer: learning_rate must be positive");
  require(!config_.clip_threshold || *config_.clip_threshold > 0.0,
          "Optimizer: clip_threshold must be positive");
  if (config_.kind == OptimizerKind::Adam) {
    m_ = Vector::Zero(num_params);
    v_ = Vector::Zero(num_params);
  }
  applied_ = GradientVector::Zero(num_params);
}

const GradientVector& Optimizer::step(Mlp& model, const GradientVector& grad,
                                      std::string_view loss_name) {
  require(grad.size() == model.num_params() && grad.size() == applied_.size(),
          "Optimizer::step: gradient length does not match parameters");
  if (!grad.allFinite()) {
    throw NumericalError("non-finite gradient in " + std::string(loss_name));
  }
  if (config_.clip_threshold) {
    const double c = *config_.clip_threshold;
    applied_ = grad.cwiseMax(-c).cwiseMin(c);
  } else {
    applied_ = grad;
  }
  ++step_count_;
  Vector& p = model.params();
  if (config_.kind == OptimizerKind::Sgd) {
    p.noalias() -= config_.learning_rate * applied_;
    return applied_;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * applied_;
  v_ = b2 * v_ + (1.0 - b2) * applied_.cwiseAbs2();
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);
  const double step = config_.learning_rate / bc1;
  p.array() -= step * m_.array() / ((v_.array() / bc2).sqrt() + config_.adam_epsilon);
  return applied_;
}

}  // namespace neuralot
