#include <algorithm>
#include <functional>
#include <map>

#include "neuralot/config.hpp"
#include "neuralot/errors.hpp"

namespace neuralot {

namespace {

TrainRun base_run(const std::string& name, std::int64_t T, StrategyConfig strategy) {
  TrainRun run;
  run.experiment_name = name;
  run.settings.iterations = T;
  run.strategy = std::move(strategy);
  return run;
}

FlowSpec flow(FlowFeatureKind f, int k, bool tp) {
  FlowSpec s;
  s.feature = f;
  s.k = k;
  s.transport_cost = tp;
  return s;
}

AdversarialConfig adversarial(double lambda, int suffix, std::optional<double> clip = {}) {
  AdversarialConfig c;
  c.lambda = lambda;
  c.critic_steps = suffix - 1;
  c.clip_threshold = clip;
  return c;
}

DualConfig dual(Regularization reg, Aggregation agg, double eps, std::int64_t T) {
  DualConfig c;
  c.regularization = reg;
  c.aggregation = agg;
  c.epsilon = eps;
  c.dual_iterations = T;
  return c;
}

SupervisedConfig supervised(SupervisedKind kind, double eps, int inner, std::int64_t T) {
  SupervisedConfig c;
  c.kind = kind;
  c.epsilon = eps;
  c.inner_iterations = inner;
  c.dual_iterations = T;
  return c;
}

using Preset = std::function<TrainRun()>;

const std::map<std::string, Preset>& presets() {
  using F = FlowFeatureKind;
  static const std::map<std::string, Preset> table = [] {
    std::map<std::string, Preset> m;
    auto add = [&m](const std::string& name, std::int64_t T, auto make) {
      m.emplace(name, [=] { return base_run(name, T, make()); });
    };
    for (bool tp : {false, true}) {
      const std::string p = tp ? "tp_" : "";
      add(p + "covariance", 5000, [=] { return flow(F::Covariance, 1, tp); });
      add(p + "exp", 30000, [=] { return flow(F::GaussianBumps, 1, tp); });
      add(p + "discr_1", tp ? 50000 : 100000, [=] { return flow(F::Discrepancy, 1, tp); });
      add(p + "discr_5", tp ? 30000 : 40000, [=] { return flow(F::Discrepancy, 5, tp); });
      add(p + "sym_discr_1", 50000, [=] { return flow(F::SymmetricDiscrepancy, 1, tp); });
      add(p + "sym_discr_5", 50000, [=] { return flow(F::SymmetricDiscrepancy, 5, tp); });
    }
    add("adv_l0.1_2", 50000, [] { return adversarial(0.1, 2); });
    add("adv_l1_10", 50000, [] { return adversarial(1.0, 10); });
    add("adv_l1_2", 50000, [] { return adversarial(1.0, 2); });
    add("adv_l1_2_clip_0.01", 50000, [] { return adversarial(1.0, 2, 0.01); });
    add("adv_l10_2", 50000, [] { return adversarial(10.0, 2); });
    add("adv_l100_2", 50000, [] { return adversarial(100.0, 2); });
    using R = Regularization;
    using A = Aggregation;
    add("seguy_ent_mean_0.1", 10000, [] { return dual(R::Entropic, A::Mean, 0.1, 10000); });
    add("seguy_ent_sum_0.1", 10000, [] { return dual(R::Entropic, A::Sum, 0.1, 10000); });
    add("seguy_l2_mean_0.1", 5000, [] { return dual(R::L2, A::Mean, 0.1, 5000); });
    add("seguy_l2_sum_0.1", 5000, [] { return dual(R::L2, A::Sum, 0.1, 5000); });
    using K = SupervisedKind;
    add("supervised_dual_0.05", 30600, [] { return supervised(K::DualPotentials, 0.05, 100, 30600); });
    add("supervised_dual_0.1", 20800, [] { return supervised(K::DualPotentials, 0.1, 100, 20800); });
    add("supervised_map_iters_1000_0.05", 51000,
        [] { return supervised(K::TransportMap, 0.05, 1000, 51000); });
    add("supervised_map_iters_200_0.05", 50000,
        [] { return supervised(K::TransportMap, 0.05, 200, 50000); });
    add("supervised_prob", 51000, [] { return supervised(K::PlanMatrix, 0.05, 100, 51000); });
    return m;
  }();
  return table;
}

}  // namespace

std::vector<std::string> registry_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : presets()) names.push_back(k);
  return names;
}

bool in_registry(const std::string& name) { return presets().count(name) > 0; }

TrainRun registry_preset(const std::string& name) {
  const auto it = presets().find(name);
  if (it == presets().end()) {
    std::string msg = "unknown experiment '" + name + "'; valid names:";
    for (const auto& n : registry_names()) msg += " " + n;
    throw ConfigError(msg);
  }
  return it->second();
}

}  // namespace neuralot
