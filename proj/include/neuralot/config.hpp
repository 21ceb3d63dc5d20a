#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "neuralot/adversarial.hpp"
#include "neuralot/dual.hpp"
#include "neuralot/flow.hpp"
#include "neuralot/supervised.hpp"

namespace neuralot {

enum class FlowFeatureKind { Covariance, GaussianBumps, Discrepancy, SymmetricDiscrepancy };

std::string_view to_string(FlowFeatureKind k);
FlowFeatureKind flow_feature_from_string(std::string_view s);

// Serializable flow settings; the bump centres are an n x n grid on [lo, hi]^2.
struct FlowSpec {
  FlowFeatureKind feature = FlowFeatureKind::GaussianBumps;
  int k = 1;
  int grid_n = 9;
  double grid_lo = -2.0;
  double grid_hi = 2.0;
  double sigma = 0.5;
  bool transport_cost = false;

  FlowLossKind to_loss_kind() const;
};

using StrategyConfig = std::variant<FlowSpec, AdversarialConfig, DualConfig, SupervisedConfig>;

std::string_view strategy_name(const StrategyConfig& s);

struct GroundTruthSpec {
  std::size_t size = kDefaultGroundTruthSize;
  double epsilon = kDefaultGroundTruthEpsilon;
  std::uint64_t seed = 20200531;
};

// A fully resolved experiment.
struct TrainRun {
  std::string experiment_name;
  std::uint64_t seed = 0;
  TrainSettings settings;  // T, batch sizes, network, optimizer
  int snapshot_count = 50;
  StrategyConfig strategy;
  GroundTruthSpec ground_truth;
  bool write_frames = true;
  std::size_t frame_points = 256;
  bool dump_labels = false;
  std::filesystem::path output_dir = "runs";

  // <output_dir>/<experiment_name>_seed<seed>
  std::filesystem::path run_dir() const;
};

nlohmann::json to_json(const TrainRun& run);
// Strict parse: unknown or misplaced keys are ConfigErrors.
TrainRun run_from_json(const nlohmann::json& j);

// Registry of named presets.
std::vector<std::string> registry_names();
bool in_registry(const std::string& name);
TrainRun registry_preset(const std::string& name);

struct ResolveRequest {
  std::optional<std::string> name;
  std::optional<std::filesystem::path> config_file;
  std::vector<std::string> overrides;  // dotted.key=value, value parsed as JSON when possible
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> iterations;
  std::optional<std::filesystem::path> output_dir;
};

// Registry preset, then config file, then overrides, then flags.
TrainRun resolve_config(const ResolveRequest& request);

// Applies one "a.b.c=value" override to a JSON config.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace neuralot
