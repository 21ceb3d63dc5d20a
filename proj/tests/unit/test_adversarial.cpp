#include <doctest.h>

#include "neuralot/adversarial.hpp"
#include "neuralot/errors.hpp"
#include "support.hpp"

using namespace neuralot;

namespace {

struct Nets {
  Mlp map;
  Mlp critic;
};

Nets random_nets(Rng& rng) {
  return {make_mlp(2, {6, 6}, 2, Activation::Tanh, true, rng),
          make_mlp(2, {6, 6}, 1, Activation::Tanh, false, rng)};
}

}  // namespace

TEST_SUITE("adversarial") {

TEST_CASE("zero critic: map loss is the transport cost") {
  Rng rng(1);
  const Mlp map = make_mlp(2, {8}, 2, Activation::Tanh, true, rng);
  const Mlp critic = init_zero_potential({8}, Activation::Tanh, rng);
  const SampleBatch X = sample_unit_ball(30, rng);
  const SampleBatch Y = sample_four_balls(40, rng);
  const auto o = adversarial_objective(X, Y, map, critic, 3.0);
  CHECK(o.critic_value == 0.0);
  CHECK(o.map_loss == o.cost);
  CHECK(o.cost > 0.0);
}

TEST_CASE("identity map on identical batches cancels the critic term") {
  Rng rng(2);
  const Mlp map = init_identity_map({8}, Activation::Tanh, rng);
  const Mlp critic = make_mlp(2, {8}, 1, Activation::Tanh, false, rng);
  const SampleBatch X = sample_unit_ball(30, rng);
  const SampleBatch Y{X.points, BatchRole::Target};
  const auto o = adversarial_objective(X, Y, map, critic, 1.0);
  CHECK(o.critic_value == 0.0);
  CHECK(o.cost == 0.0);
}

TEST_CASE("doubling lambda doubles the penalty contribution exactly") {
  Rng rng(3);
  const Nets n = random_nets(rng);
  const SampleBatch X = sample_unit_ball(20, rng);
  const SampleBatch Y = sample_four_balls(20, rng);
  const auto a = adversarial_objective(X, Y, n.map, n.critic, 1.5);
  const auto b = adversarial_objective(X, Y, n.map, n.critic, 3.0);
  CHECK(b.map_loss - b.cost == 2.0 * (a.map_loss - a.cost));
}

TEST_CASE("map and critic gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Nets n = random_nets(rng);
    const Matrix X = to_matrix(sample_unit_ball(9, rng));
    const Matrix Y = to_matrix(sample_four_balls(7, rng));
    const double lambda = 2.5;
    const auto g = adversarial_gradients(X, Y, n.map, n.critic, lambda);

    auto fmap = [&](const Vector& p) {
      Mlp m = n.map;
      m.params() = p;
      return adversarial_gradients(X, Y, m, n.critic, lambda, false, false).objective.map_loss;
    };
    CHECK(testing::relative_error(g.map_grad, testing::finite_differences(fmap, n.map.params())) < 1e-4);

    auto fcritic = [&](const Vector& p) {
      Mlp c = n.critic;
      c.params() = p;
      return -lambda * adversarial_gradients(X, Y, n.map, c, lambda, false, false).objective.critic_value;
    };
    CHECK(testing::relative_error(g.critic_grad, testing::finite_differences(fcritic, n.critic.params())) <
          1e-4);
  }
}

TEST_CASE("partial gradient requests agree with the full computation") {
  Rng rng(4);
  const Nets n = random_nets(rng);
  const Matrix X = to_matrix(sample_unit_ball(16, rng));
  const Matrix Y = to_matrix(sample_four_balls(16, rng));
  const auto full = adversarial_gradients(X, Y, n.map, n.critic, 1.0);
  CHECK(adversarial_gradients(X, Y, n.map, n.critic, 1.0, true, false).map_grad == full.map_grad);
  CHECK(adversarial_gradients(X, Y, n.map, n.critic, 1.0, false, true).critic_grad == full.critic_grad);
}

TEST_CASE("one map step with a frozen critic decreases the map loss for a small enough rate") {
  Rng rng(5);
  const Nets n = random_nets(rng);
  const Matrix X = to_matrix(sample_unit_ball(32, rng));
  const Matrix Y = to_matrix(sample_four_balls(32, rng));
  const auto g = adversarial_gradients(X, Y, n.map, n.critic, 1.0, true, false);
  bool decreased = false;
  for (double lr : {1e-1, 1e-2, 1e-3, 1e-4}) {
    Mlp m = n.map;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::Sgd;
    cfg.learning_rate = lr;
    Optimizer opt(cfg, m.num_params());
    opt.step(m, g.map_grad);
    const double after = adversarial_gradients(X, Y, m, n.critic, 1.0, false, false).objective.map_loss;
    if (after < g.objective.map_loss) decreased = true;
  }
  CHECK(decreased);
}

TEST_CASE("training logs satisfy the additivity identity and zero steps keep the identity") {
  const GroundTruth gt = build_ground_truth(40, 0.05, 2);
  TrainSettings s;
  s.iterations = 30;
  s.batch_x = s.batch_y = 32;
  s.network.hidden_dims = {8, 8};
  AdversarialConfig cfg;
  cfg.lambda = 7.0;
  cfg.critic_steps = 2;
  cfg.clip_threshold = 0.01;
  Rng rng(6);
  Recorder rec(gt, RecorderOptions{30, 5, std::nullopt, false, 0});
  const auto r = train_adversarial(cfg, s, rng, rec);
  REQUIRE(r.trace.rows.size() == 30);
  CHECK(r.trace.names == std::vector<std::string>{"map_loss", "cost", "adversarial"});
  for (const auto& row : r.trace.rows) CHECK(row[0] == row[1] + cfg.lambda * row[2]);

  s.iterations = 0;
  Rng rng0(6);
  Recorder rec0(gt, RecorderOptions{0, 5, std::nullopt, false, 0});
  const auto r0 = train_adversarial(cfg, s, rng0, rec0);
  Rng pr(7);
  const Matrix x = testing::random_points(50, pr);
  CHECK(r0.map.forward(x) == x);
}

TEST_CASE("critic clipping bounds every applied entry") {
  Rng rng(8);
  const Nets n = random_nets(rng);
  Mlp critic = n.critic;
  OptimizerConfig cfg;
  cfg.clip_threshold = 0.01;
  Optimizer opt(cfg, critic.num_params());
  for (int t = 0; t < 5; ++t) {
    const Matrix X = to_matrix(sample_unit_ball(16, rng));
    const Matrix Y = to_matrix(sample_four_balls(16, rng));
    const auto g = adversarial_gradients(X, Y, n.map, critic, 100.0, false, true);
    CHECK(opt.step(critic, g.critic_grad).cwiseAbs().maxCoeff() <= 0.01);
  }
}

TEST_CASE("invalid settings are rejected") {
  Rng rng(9);
  const Nets n = random_nets(rng);
  const Matrix X = to_matrix(sample_unit_ball(4, rng));
  CHECK_THROWS_AS(adversarial_gradients(X, X, n.map, n.critic, 0.0), PreconditionError);
  CHECK_THROWS_AS(adversarial_gradients(X, Matrix(2, 0), n.map, n.critic, 1.0), PreconditionError);
}

}  // TEST_SUITE
