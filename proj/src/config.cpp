#include "neuralot/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "neuralot/errors.hpp"

namespace neuralot {

using nlohmann::json;

std::string_view to_string(FlowFeatureKind k) {
  switch (k) {
    case FlowFeatureKind::Covariance: return "covariance";
    case FlowFeatureKind::GaussianBumps: return "bumps";
    case FlowFeatureKind::Discrepancy: return "discrepancy";
    case FlowFeatureKind::SymmetricDiscrepancy: return "sym_discrepancy";
  }
  return "?";
}

FlowFeatureKind flow_feature_from_string(std::string_view s) {
  if (s == "covariance") return FlowFeatureKind::Covariance;
  if (s == "bumps") return FlowFeatureKind::GaussianBumps;
  if (s == "discrepancy") return FlowFeatureKind::Discrepancy;
  if (s == "sym_discrepancy") return FlowFeatureKind::SymmetricDiscrepancy;
  throw ConfigError("unknown flow feature '" + std::string(s) +
                    "' (expected covariance|bumps|discrepancy|sym_discrepancy)");
}

FlowLossKind FlowSpec::to_loss_kind() const {
  FlowLossKind out;
  out.with_transport_cost = transport_cost;
  switch (feature) {
    case FlowFeatureKind::Covariance: out.feature = CovarianceFeatures{}; break;
    case FlowFeatureKind::GaussianBumps:
      out.feature = GaussianBumpFeatures{bump_grid(grid_n, grid_lo, grid_hi), sigma};
      break;
    case FlowFeatureKind::Discrepancy: out.feature = Discrepancy{k}; break;
    case FlowFeatureKind::SymmetricDiscrepancy: out.feature = SymmetricDiscrepancy{k}; break;
  }
  return out;
}

std::string_view strategy_name(const StrategyConfig& s) {
  static constexpr std::string_view names[] = {"flow", "adversarial", "dual", "supervised"};
  return names[s.index()];
}

std::filesystem::path TrainRun::run_dir() const {
  return output_dir / (experiment_name + "_seed" + std::to_string(seed));
}

namespace {

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json strategy_to_json(const StrategyConfig& s) {
  return std::visit(
      [](const auto& c) -> json {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, FlowSpec>) {
          return {{"type", "flow"},          {"feature", to_string(c.feature)},
                  {"k", c.k},                {"grid_n", c.grid_n},
                  {"grid_lo", c.grid_lo},    {"grid_hi", c.grid_hi},
                  {"sigma", c.sigma},        {"transport_cost", c.transport_cost}};
        } else if constexpr (std::is_same_v<C, AdversarialConfig>) {
          return {{"type", "adversarial"},
                  {"lambda", c.lambda},
                  {"critic_steps", c.critic_steps},
                  {"clip_threshold", optional_number(c.clip_threshold)}};
        } else if constexpr (std::is_same_v<C, DualConfig>) {
          return {{"type", "dual"},
                  {"regularization", to_string(c.regularization)},
                  {"epsilon", c.epsilon},
                  {"aggregation", to_string(c.aggregation)},
                  {"dual_iterations", c.dual_iterations},
                  {"reuse_potentials", c.reuse_potentials}};
        } else {
          return {{"type", "supervised"},
                  {"target", to_string(c.kind)},
                  {"epsilon", c.epsilon},
                  {"sinkhorn_tolerance", c.sinkhorn.tolerance},
                  {"sinkhorn_max_iterations", c.sinkhorn.max_iterations},
                  {"inner_iterations", c.inner_iterations},
                  {"dual_loss", to_string(c.dual_loss)},
                  {"warm_start", c.warm_start},
                  {"queue_depth", c.queue_depth},
                  {"dual_iterations", c.dual_iterations},
                  {"plan_hidden", c.plan_hidden},
                  {"plan_batch", c.plan_batch}};
        }
      },
      s);
}

// Reads keys of one JSON object and rejects whatever is left unread.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type (" + j_.at(key).dump() + ")");
    }
  }

  std::optional<double> get_optional(const std::string& key, std::optional<double> fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    if (j_.at(key).is_null()) return std::nullopt;
    if (!j_.at(key).is_number()) throw ConfigError(where_ + "." + key + ": expected a number or null");
    return j_.at(key).get<double>();
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown field '" + k + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

StrategyConfig strategy_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("strategy: missing 'type'");
  const std::string type = j.at("type").get<std::string>();
  ObjectReader r(j, "strategy(" + type + ")");
  r.get<std::string>("type", "");
  StrategyConfig out;
  if (type == "flow") {
    FlowSpec c;
    c.feature = flow_feature_from_string(r.get<std::string>("feature", std::string(to_string(c.feature))));
    c.k = r.get("k", c.k);
    c.grid_n = r.get("grid_n", c.grid_n);
    c.grid_lo = r.get("grid_lo", c.grid_lo);
    c.grid_hi = r.get("grid_hi", c.grid_hi);
    c.sigma = r.get("sigma", c.sigma);
    c.transport_cost = r.get("transport_cost", c.transport_cost);
    check(c.k >= 1, "strategy.k must be >= 1");
    check(c.grid_n >= 1, "strategy.grid_n must be >= 1");
    check(c.sigma > 0.0, "strategy.sigma must be positive");
    out = c;
  } else if (type == "adversarial") {
    AdversarialConfig c;
    c.lambda = r.get("lambda", c.lambda);
    c.critic_steps = r.get("critic_steps", c.critic_steps);
    c.clip_threshold = r.get_optional("clip_threshold", c.clip_threshold);
    check(c.lambda > 0.0, "strategy.lambda must be positive");
    check(c.critic_steps >= 1, "strategy.critic_steps must be >= 1");
    check(!c.clip_threshold || *c.clip_threshold > 0.0, "strategy.clip_threshold must be positive");
    out = c;
  } else if (type == "dual") {
    DualConfig c;
    c.regularization = regularization_from_string(
        r.get<std::string>("regularization", std::string(to_string(c.regularization))));
    c.epsilon = r.get("epsilon", c.epsilon);
    c.aggregation = aggregation_from_string(
        r.get<std::string>("aggregation", std::string(to_string(c.aggregation))));
    c.dual_iterations = r.get("dual_iterations", c.dual_iterations);
    c.reuse_potentials = r.get("reuse_potentials", c.reuse_potentials);
    check(c.epsilon > 0.0, "strategy.epsilon must be positive");
    check(c.dual_iterations >= 0, "strategy.dual_iterations must be >= 0");
    out = c;
  } else if (type == "supervised") {
    SupervisedConfig c;
    c.kind = supervised_kind_from_string(r.get<std::string>("target", std::string(to_string(c.kind))));
    c.epsilon = r.get("epsilon", c.epsilon);
    c.sinkhorn.tolerance = r.get("sinkhorn_tolerance", c.sinkhorn.tolerance);
    c.sinkhorn.max_iterations = r.get("sinkhorn_max_iterations", c.sinkhorn.max_iterations);
    c.inner_iterations = r.get("inner_iterations", c.inner_iterations);
    c.dual_loss = label_loss_from_string(r.get<std::string>("dual_loss", std::string(to_string(c.dual_loss))));
    c.warm_start = r.get("warm_start", c.warm_start);
    c.queue_depth = r.get("queue_depth", c.queue_depth);
    c.dual_iterations = r.get("dual_iterations", c.dual_iterations);
    c.plan_hidden = r.get("plan_hidden", c.plan_hidden);
    c.plan_batch = r.get("plan_batch", c.plan_batch);
    check(c.epsilon >= kMinRecommendedEpsilon, "strategy.epsilon must be >= 0.005");
    check(c.sinkhorn.tolerance > 0.0, "strategy.sinkhorn_tolerance must be positive");
    check(c.sinkhorn.max_iterations >= 1, "strategy.sinkhorn_max_iterations must be >= 1");
    check(c.inner_iterations >= 1, "strategy.inner_iterations must be >= 1");
    check(c.queue_depth >= 0, "strategy.queue_depth must be >= 0");
    check(c.dual_iterations >= 0, "strategy.dual_iterations must be >= 0");
    check(c.plan_batch >= 1, "strategy.plan_batch must be >= 1");
    out = c;
  } else {
    throw ConfigError("strategy: unknown type '" + type + "' (expected flow|adversarial|dual|supervised)");
  }
  r.finish();
  return out;
}

}  // namespace

json to_json(const TrainRun& run) {
  const auto& s = run.settings;
  return {{"experiment_name", run.experiment_name},
          {"seed", run.seed},
          {"iterations", s.iterations},
          {"batch_x", s.batch_x},
          {"batch_y", s.batch_y},
          {"snapshot_count", run.snapshot_count},
          {"network",
           {{"hidden_dims", s.network.hidden_dims}, {"activation", to_string(s.network.activation)}}},
          {"optimizer",
           {{"kind", to_string(s.optimizer.kind)},
            {"learning_rate", s.optimizer.learning_rate},
            {"beta1", s.optimizer.beta1},
            {"beta2", s.optimizer.beta2},
            {"adam_epsilon", s.optimizer.adam_epsilon},
            {"clip_threshold", optional_number(s.optimizer.clip_threshold)}}},
          {"strategy", strategy_to_json(run.strategy)},
          {"ground_truth",
           {{"size", run.ground_truth.size},
            {"epsilon", run.ground_truth.epsilon},
            {"seed", run.ground_truth.seed}}},
          {"write_frames", run.write_frames},
          {"frame_points", run.frame_points},
          {"dump_labels", run.dump_labels},
          {"output_dir", run.output_dir.string()}};
}

TrainRun run_from_json(const json& j) {
  ObjectReader r(j, "config");
  TrainRun run;
  run.experiment_name = r.get<std::string>("experiment_name", "");
  check(!run.experiment_name.empty(), "config: experiment_name is required");
  run.seed = r.get("seed", run.seed);
  auto& s = run.settings;
  s.iterations = r.get("iterations", s.iterations);
  s.batch_x = r.get("batch_x", s.batch_x);
  s.batch_y = r.get("batch_y", s.batch_y);
  run.snapshot_count = r.get("snapshot_count", run.snapshot_count);
  check(s.iterations >= 0, "config.iterations must be >= 0");
  check(s.batch_x >= 1 && s.batch_y >= 1, "config: batch sizes must be >= 1");
  check(run.snapshot_count >= 1, "config.snapshot_count must be >= 1");
  if (const json* n = r.child("network")) {
    ObjectReader nr(*n, "network");
    s.network.hidden_dims = nr.get("hidden_dims", s.network.hidden_dims);
    s.network.activation = activation_from_string(
        nr.get<std::string>("activation", std::string(to_string(s.network.activation))));
    nr.finish();
    for (int d : s.network.hidden_dims) check(d >= 1, "network.hidden_dims entries must be >= 1");
  }
  if (const json* o = r.child("optimizer")) {
    ObjectReader orr(*o, "optimizer");
    auto& oc = s.optimizer;
    oc.kind = optimizer_from_string(orr.get<std::string>("kind", std::string(to_string(oc.kind))));
    oc.learning_rate = orr.get("learning_rate", oc.learning_rate);
    oc.beta1 = orr.get("beta1", oc.beta1);
    oc.beta2 = orr.get("beta2", oc.beta2);
    oc.adam_epsilon = orr.get("adam_epsilon", oc.adam_epsilon);
    oc.clip_threshold = orr.get_optional("clip_threshold", oc.clip_threshold);
    orr.finish();
    check(oc.learning_rate > 0.0, "optimizer.learning_rate must be positive");
  }
  const json* st = r.child("strategy");
  if (st == nullptr) throw ConfigError("config: strategy is required");
  run.strategy = strategy_from_json(*st);
  if (const json* g = r.child("ground_truth")) {
    ObjectReader gr(*g, "ground_truth");
    run.ground_truth.size = gr.get("size", run.ground_truth.size);
    run.ground_truth.epsilon = gr.get("epsilon", run.ground_truth.epsilon);
    run.ground_truth.seed = gr.get("seed", run.ground_truth.seed);
    gr.finish();
    check(run.ground_truth.size >= 1, "ground_truth.size must be >= 1");
    check(run.ground_truth.epsilon >= kMinRecommendedEpsilon, "ground_truth.epsilon must be >= 0.005");
  }
  run.write_frames = r.get("write_frames", run.write_frames);
  run.frame_points = r.get("frame_points", run.frame_points);
  run.dump_labels = r.get("dump_labels", run.dump_labels);
  run.output_dir = r.get<std::string>("output_dir", run.output_dir.string());
  r.finish();
  return run;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) {
      throw ConfigError("override: unknown key '" + key + "'");
    }
    node = &(*node)[parts[i]];
  }
  *node = value;
}

TrainRun resolve_config(const ResolveRequest& request) {
  json file;
  if (request.config_file) {
    std::ifstream in(*request.config_file);
    if (!in) throw ConfigError("cannot open config file " + request.config_file->string());
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + request.config_file->string() + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
  }
  std::string name;
  if (request.name) {
    name = *request.name;
  } else if (file.contains("experiment_name")) {
    name = file.at("experiment_name").get<std::string>();
  } else {
    throw ConfigError("no experiment name given");
  }

  json base;
  if (in_registry(name)) {
    base = to_json(registry_preset(name));
  } else if (file.contains("strategy")) {
    // A custom experiment defined entirely by the file.
    base = file;
    base["experiment_name"] = name;
    base = to_json(run_from_json(base));
  } else {
    registry_preset(name);  // throws the unknown-name error listing valid names
  }
  if (!file.is_null()) {
    json patch = file;
    patch.erase("experiment_name");
    if (patch.contains("strategy") && patch["strategy"].contains("type") &&
        patch["strategy"]["type"] != base["strategy"]["type"]) {
      throw ConfigError("config file strategy type '" + patch["strategy"]["type"].get<std::string>() +
                        "' conflicts with experiment '" + name + "' (" +
                        base["strategy"]["type"].get<std::string>() + ")");
    }
    base.merge_patch(patch);
  }
  for (const auto& o : request.overrides) apply_override(base, o);
  if (request.seed) base["seed"] = *request.seed;
  if (request.iterations) {
    // --iters sets T for every stage of the run.
    base["iterations"] = *request.iterations;
    if (base["strategy"].contains("dual_iterations")) {
      base["strategy"]["dual_iterations"] = *request.iterations;
    }
  }
  if (request.output_dir) base["output_dir"] = request.output_dir->string();
  base["experiment_name"] = name;
  return run_from_json(base);
}

}  // namespace neuralot
