#include "neuralot/adversarial.hpp"

#include <cmath>

#include "neuralot/errors.hpp"

namespace neuralot {

namespace {

AdversarialObjective combine(double cost, double critic_value, double lambda) {
  // map_loss is assembled from the logged parts so the logging identity
  // map_loss == cost + lambda * adversarial holds exactly.
  return {cost + lambda * critic_value, cost, critic_value};
}

}  // namespace

AdversarialObjective adversarial_objective(const SampleBatch& X, const SampleBatch& Y,
                                           const Mlp& map, const Mlp& critic, double lambda) {
  require(!X.empty() && !Y.empty(), "adversarial_objective: batches must be non-empty");
  const Matrix xm = to_matrix(X);
  const Matrix tx = map.forward(xm);
  const double cost = (tx - xm).colwise().squaredNorm().mean();
  const double value = critic.forward(tx).mean() - critic.forward(to_matrix(Y)).mean();
  return combine(cost, value, lambda);
}

AdversarialGradients adversarial_gradients(const Matrix& X, const Matrix& Y, const Mlp& map,
                                           const Mlp& critic, double lambda, bool need_map_grad,
                                           bool need_critic_grad) {
  require(X.cols() > 0 && Y.cols() > 0, "adversarial_gradients: batches must be non-empty");
  require(lambda > 0.0, "adversarial_gradients: lambda must be positive");
  const double nx = static_cast<double>(X.cols());
  const double ny = static_cast<double>(Y.cols());

  ForwardCache map_cache;
  const Matrix tx = map.forward(X, map_cache);
  ForwardCache fx_cache;
  ForwardCache fy_cache;
  const Matrix fx = critic.forward(tx, fx_cache);
  const Matrix fy = critic.forward(Y, fy_cache);

  AdversarialGradients out;
  const Matrix delta = tx - X;
  out.objective = combine(delta.colwise().squaredNorm().mean(), fx.mean() - fy.mean(), lambda);

  // Critic minimizes -lambda * (mean f(TX) - mean f(Y)).
  if (!need_map_grad && !need_critic_grad) return out;
  const Backprop bx = critic.backward(fx_cache, Matrix::Constant(1, X.cols(), -lambda / nx));
  if (need_critic_grad) {
    const Backprop by = critic.backward(fy_cache, Matrix::Constant(1, Y.cols(), lambda / ny));
    out.critic_grad = bx.params + by.params;
  }
  if (need_map_grad) {
    // Map minimizes cost + lambda * mean f(TX); reuse d f / d input from bx.
    const Matrix g_tx = (2.0 / nx) * delta - bx.input;
    out.map_grad = map.backward(map_cache, g_tx).params;
  }
  return out;
}

AdversarialResult train_adversarial(const AdversarialConfig& config, const TrainSettings& settings,
                                    Rng& rng, Recorder& recorder) {
  require(config.critic_steps >= 1, "train_adversarial: critic_steps must be >= 1");
  require(config.lambda > 0.0, "train_adversarial: lambda must be positive");
  const auto& net = settings.network;
  Mlp map = init_identity_map(net.hidden_dims, net.activation, rng);
  Mlp critic = init_zero_potential(net.hidden_dims, net.activation, rng);
  Optimizer map_opt(settings.optimizer, map.num_params());
  OptimizerConfig critic_cfg = settings.optimizer;
  critic_cfg.clip_threshold = config.clip_threshold;
  Optimizer critic_opt(critic_cfg, critic.num_params());

  AdversarialResult result;
  const MapFunction map_fn = as_map_function(map);
  recorder.start();
  if (recorder.due(0)) recorder.record(0, map_fn, {});
  for (std::int64_t t = 1; t <= settings.iterations; ++t) {
    for (int c = 0; c < config.critic_steps; ++c) {
      const Matrix X = to_matrix(draw_source(settings.batch_x, rng));
      const Matrix Y = to_matrix(draw_target(settings.batch_y, rng));
      const AdversarialGradients g =
          adversarial_gradients(X, Y, map, critic, config.lambda, false, true);
      critic_opt.step(critic, g.critic_grad, "adversarial critic loss");
    }
    const Matrix X = to_matrix(draw_source(settings.batch_x, rng));
    const Matrix Y = to_matrix(draw_target(settings.batch_y, rng));
    const AdversarialGradients g =
        adversarial_gradients(X, Y, map, critic, config.lambda, true, false);
    if (!std::isfinite(g.objective.map_loss)) {
      throw NumericalError("adversarial map loss is not finite at step " + std::to_string(t));
    }
    map_opt.step(map, g.map_grad, "adversarial map loss");
    const LossComponents comps{{"map_loss", g.objective.map_loss},
                               {"cost", g.objective.cost},
                               {"adversarial", g.objective.critic_value}};
    result.trace.push(comps);
    if (recorder.due(t)) recorder.record(t, map_fn, comps);
  }
  result.report = recorder.finish();
  result.map = std::move(map);
  result.critic = std::move(critic);
  return result;
}

}  // namespace neuralot
