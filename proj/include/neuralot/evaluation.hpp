#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "neuralot/geometry.hpp"
#include "neuralot/mlp.hpp"
#include "neuralot/sinkhorn.hpp"

namespace neuralot {

// Reference pairs (X_i, T_opt(X_i)) for the error metric, plus the Sinkhorn
// settings that produced them.
struct GroundTruth {
  std::vector<Point2> sources;
  std::vector<Point2> targets;
  // The target-side sample the plan was solved against (used for frames).
  std::vector<Point2> target_samples;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  int sinkhorn_iterations = 0;
  double marginal_error = 0.0;

  std::size_t size() const { return sources.size(); }
};

inline constexpr std::size_t kDefaultGroundTruthSize = 1000;
inline constexpr double kDefaultGroundTruthEpsilon = 0.01;

// Samples B points from each measure, solves the entropic problem at
// `epsilon`, and maps every source through the barycentric projection.
// Throws NumericalError if Sinkhorn does not converge.
GroundTruth build_ground_truth(std::size_t B, double epsilon, std::uint64_t seed,
                               SinkhornConfig sinkhorn = {});

// ground_truth.csv (id,x0,x1,tx0,tx1), ground_truth_targets.csv (id,y0,y1)
// and ground_truth.json (B, epsilon, seed, solver stats) in `dir`.
void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& dir);
GroundTruth read_ground_truth(const std::filesystem::path& dir);
bool ground_truth_exists(const std::filesystem::path& dir);

// Maps a 2 x N block of points to a 2 x N block of images.
using MapFunction = std::function<Matrix(const Matrix&)>;

MapFunction as_map_function(const Mlp& model);

// (1/B) sum_i |T(X_i) - T_opt(X_i)|^2
double epsilon2(const MapFunction& map, const GroundTruth& gt);
double epsilon2(const Mlp& model, const GroundTruth& gt);

// S evenly spaced steps ending at T (at most T of them); T = 0 gives {0}.
std::vector<std::int64_t> snapshot_schedule(std::int64_t total_steps, int snapshot_count);

using LossComponents = std::vector<std::pair<std::string, double>>;

struct Snapshot {
  std::int64_t step = 0;
  double t_over_T = 0.0;
  double eps2 = 0.0;
  double wall_secs = 0.0;
  LossComponents losses;
};

struct StageTiming {
  std::string stage;
  std::int64_t steps = 0;
  double secs = 0.0;
};

struct EvalReport {
  std::vector<Snapshot> snapshots;
  double min_eps2 = 0.0;
  std::int64_t t_min = 0;
  double sigma_eps2_after_min = 0.0;
  double secs_per_step = 0.0;
  double secs_to_tmin = 0.0;
  std::int64_t total_steps = 0;
  // Extra stages that run before the snapshotted one (e.g. dual fitting).
  std::vector<StageTiming> stages;
  // Strategy-specific counters (skipped batches, Sinkhorn iterations, ...).
  nlohmann::json counters = nlohmann::json::object();
};

// Minimum, earliest arg-min, population std over snapshots with t >= t_min,
// and wall-clock rates. Throws on an empty list.
EvalReport finalize_report(const std::vector<Snapshot>& snapshots);

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// frame_{index:04}.csv with rows role,id,x0,x1 (role in src|map|tgt).
std::filesystem::path emit_frame(const std::filesystem::path& run_dir, int snapshot_index,
                                 const SampleBatch& X, const SampleBatch& TX,
                                 const SampleBatch& Y);

// Shortest round-trip decimal representation.
std::string format_double(double x);

class Stopwatch {
 public:
  void start() {
    running_ = true;
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    if (!running_) return;
    acc_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    running_ = false;
  }
  double seconds() const {
    if (!running_) return acc_;
    return acc_ + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_{};
  double acc_ = 0.0;
  bool running_ = false;
};

struct RecorderOptions {
  std::int64_t total_steps = 0;
  int snapshot_count = 50;
  std::optional<std::filesystem::path> run_dir;
  bool write_frames = true;
  std::size_t frame_points = 256;
};

// Drives the snapshot protocol from inside a training loop: evaluates the
// error metric on schedule, appends metrics.csv / timings.csv rows, writes
// frames, and keeps training wall-clock time (evaluation time excluded).
class Recorder {
 public:
  Recorder(const GroundTruth& gt, RecorderOptions options);

  void start() { clock_.start(); }
  bool due(std::int64_t step) const;
  void record(std::int64_t step, const MapFunction& map, const LossComponents& losses);
  void add_stage(StageTiming stage) { stages_.push_back(std::move(stage)); }
  nlohmann::json& counters() { return counters_; }

  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  const std::vector<std::int64_t>& schedule() const { return schedule_; }
  std::int64_t total_steps() const { return options_.total_steps; }

  EvalReport finish();

 private:
  const GroundTruth& gt_;
  RecorderOptions options_;
  std::vector<std::int64_t> schedule_;
  std::size_t next_ = 0;
  std::vector<Snapshot> snapshots_;
  std::vector<StageTiming> stages_;
  nlohmann::json counters_ = nlohmann::json::object();
  Stopwatch clock_;
  std::ofstream metrics_;
  std::ofstream timings_;
  SampleBatch frame_x_;
  SampleBatch frame_y_;
};

}  // namespace neuralot
