#include "neuralot/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "neuralot/errors.hpp"

namespace neuralot {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

GroundTruth build_ground_truth(std::size_t B, double epsilon, std::uint64_t seed,
                               SinkhornConfig sinkhorn) {
  require(B >= 1, "build_ground_truth: B must be >= 1");
  require(epsilon >= kMinRecommendedEpsilon,
          "build_ground_truth: epsilon must be >= " + format_double(kMinRecommendedEpsilon));
  Rng rng(seed);
  const SampleBatch X = sample_unit_ball(B, rng);
  const SampleBatch Y = sample_four_balls(B, rng);
  sinkhorn.epsilon = epsilon;
  sinkhorn.warm_start.reset();
  const Vector w = uniform_weights(static_cast<Eigen::Index>(B));
  const DiscreteOtSolution sol = sinkhorn_log(cost_matrix(X, Y), w, w, sinkhorn);
  if (!sol.converged) {
    throw NumericalError("build_ground_truth: Sinkhorn did not converge (marginal error " +
                         format_double(sol.marginal_error) + " after " +
                         std::to_string(sol.iterations_used) + " iterations)");
  }
  GroundTruth gt;
  gt.sources = X.points;
  gt.targets = barycentric_map(sol.plan, w, Y);
  gt.target_samples = Y.points;
  gt.epsilon = epsilon;
  gt.seed = seed;
  gt.sinkhorn_iterations = sol.iterations_used;
  gt.marginal_error = sol.marginal_error;
  return gt;
}

namespace {

std::vector<std::vector<double>> read_csv_rows(const fs::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      double v = 0.0;
      const auto res = std::from_chars(line.data() + pos, line.data() + comma, v);
      if (res.ec != std::errc()) throw std::runtime_error("malformed number in " + path.string());
      row.push_back(v);
      pos = comma + 1;
    }
    if (row.size() != columns) throw std::runtime_error("wrong column count in " + path.string());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void write_ground_truth(const GroundTruth& gt, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "ground_truth.csv");
    if (!out) throw std::runtime_error("cannot write " + (dir / "ground_truth.csv").string());
    out << "id,x0,x1,tx0,tx1\n";
    for (std::size_t i = 0; i < gt.size(); ++i) {
      out << i << ',' << format_double(gt.sources[i].x0) << ',' << format_double(gt.sources[i].x1)
          << ',' << format_double(gt.targets[i].x0) << ',' << format_double(gt.targets[i].x1)
          << '\n';
    }
  }
  {
    std::ofstream out(dir / "ground_truth_targets.csv");
    out << "id,y0,y1\n";
    for (std::size_t j = 0; j < gt.target_samples.size(); ++j) {
      out << j << ',' << format_double(gt.target_samples[j].x0) << ','
          << format_double(gt.target_samples[j].x1) << '\n';
    }
  }
  nlohmann::json meta{{"B", gt.size()},
                      {"epsilon", gt.epsilon},
                      {"seed", gt.seed},
                      {"sinkhorn_iterations", gt.sinkhorn_iterations},
                      {"marginal_error", gt.marginal_error}};
  std::ofstream(dir / "ground_truth.json") << meta.dump(2) << '\n';
}

bool ground_truth_exists(const fs::path& dir) {
  return fs::exists(dir / "ground_truth.csv") && fs::exists(dir / "ground_truth.json");
}

GroundTruth read_ground_truth(const fs::path& dir) {
  GroundTruth gt;
  for (const auto& r : read_csv_rows(dir / "ground_truth.csv", 5)) {
    gt.sources.push_back({r[1], r[2]});
    gt.targets.push_back({r[3], r[4]});
  }
  if (gt.sources.empty()) throw std::runtime_error("ground truth is empty");
  if (fs::exists(dir / "ground_truth_targets.csv")) {
    for (const auto& r : read_csv_rows(dir / "ground_truth_targets.csv", 3)) {
      gt.target_samples.push_back({r[1], r[2]});
    }
  }
  std::ifstream in(dir / "ground_truth.json");
  if (in) {
    const auto meta = nlohmann::json::parse(in);
    gt.epsilon = meta.value("epsilon", 0.0);
    gt.seed = meta.value("seed", std::uint64_t{0});
    gt.sinkhorn_iterations = meta.value("sinkhorn_iterations", 0);
    gt.marginal_error = meta.value("marginal_error", 0.0);
  }
  return gt;
}

MapFunction as_map_function(const Mlp& model) {
  return [&model](const Matrix& x) { return model.forward(x); };
}

double epsilon2(const MapFunction& map, const GroundTruth& gt) {
  require(gt.size() > 0, "epsilon2: empty ground truth");
  const Matrix X = to_matrix(SampleBatch{gt.sources, BatchRole::Source});
  const Matrix T = to_matrix(SampleBatch{gt.targets, BatchRole::Mapped});
  const Matrix TX = map(X);
  require(TX.rows() == 2 && TX.cols() == X.cols(), "epsilon2: map returned wrong shape");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < X.cols(); ++i) acc += (TX.col(i) - T.col(i)).squaredNorm();
  return acc / static_cast<double>(X.cols());
}

double epsilon2(const Mlp& model, const GroundTruth& gt) {
  return epsilon2(as_map_function(model), gt);
}

std::vector<std::int64_t> snapshot_schedule(std::int64_t total_steps, int snapshot_count) {
  require(total_steps >= 0, "snapshot_schedule: total steps must be >= 0");
  require(snapshot_count >= 1, "snapshot_schedule: need at least one snapshot");
  if (total_steps == 0) return {0};
  const std::int64_t n = std::min<std::int64_t>(snapshot_count, total_steps);
  std::vector<std::int64_t> steps;
  steps.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 1; k <= n; ++k) steps.push_back(k * total_steps / n);
  return steps;
}

EvalReport finalize_report(const std::vector<Snapshot>& snapshots) {
  require(!snapshots.empty(), "finalize_report: need at least one snapshot");
  EvalReport r;
  r.snapshots = snapshots;
  std::size_t arg = 0;
  for (std::size_t k = 1; k < snapshots.size(); ++k) {
    if (snapshots[k].eps2 < snapshots[arg].eps2) arg = k;
  }
  r.min_eps2 = snapshots[arg].eps2;
  r.t_min = snapshots[arg].step;
  double mean = 0.0;
  const std::size_t tail = snapshots.size() - arg;
  for (std::size_t k = arg; k < snapshots.size(); ++k) mean += snapshots[k].eps2;
  mean /= static_cast<double>(tail);
  double var = 0.0;
  for (std::size_t k = arg; k < snapshots.size(); ++k) {
    const double d = snapshots[k].eps2 - mean;
    var += d * d;
  }
  r.sigma_eps2_after_min = std::sqrt(var / static_cast<double>(tail));
  r.total_steps = snapshots.back().step;
  const double total_secs = snapshots.back().wall_secs;
  r.secs_per_step = r.total_steps > 0 ? total_secs / static_cast<double>(r.total_steps) : 0.0;
  r.secs_to_tmin = r.secs_per_step * static_cast<double>(r.t_min);
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : r.snapshots) {
    nlohmann::json losses = nlohmann::json::object();
    for (const auto& [k, v] : s.losses) losses[k] = v;
    snaps.push_back({{"step", s.step},
                     {"t_over_T", s.t_over_T},
                     {"eps2", s.eps2},
                     {"wall_secs", s.wall_secs},
                     {"losses", losses}});
  }
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"stage", s.stage}, {"steps", s.steps}, {"secs", s.secs}});
  }
  return {{"min_eps2", r.min_eps2},
          {"t_min", r.t_min},
          {"sigma_eps2_after_min", r.sigma_eps2_after_min},
          {"secs_per_step", r.secs_per_step},
          {"secs_to_tmin", r.secs_to_tmin},
          {"total_steps", r.total_steps},
          {"stages", stages},
          {"counters", r.counters},
          {"snapshots", snaps}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.min_eps2 = j.at("min_eps2").get<double>();
  r.t_min = j.at("t_min").get<std::int64_t>();
  r.sigma_eps2_after_min = j.at("sigma_eps2_after_min").get<double>();
  r.secs_per_step = j.at("secs_per_step").get<double>();
  r.secs_to_tmin = j.at("secs_to_tmin").get<double>();
  r.total_steps = j.value("total_steps", std::int64_t{0});
  if (j.contains("stages")) {
    for (const auto& s : j.at("stages")) {
      r.stages.push_back({s.at("stage").get<std::string>(), s.at("steps").get<std::int64_t>(),
                          s.at("secs").get<double>()});
    }
  }
  if (j.contains("counters")) r.counters = j.at("counters");
  if (j.contains("snapshots")) {
    for (const auto& s : j.at("snapshots")) {
      Snapshot snap;
      snap.step = s.at("step").get<std::int64_t>();
      snap.t_over_T = s.at("t_over_T").get<double>();
      snap.eps2 = s.at("eps2").get<double>();
      snap.wall_secs = s.at("wall_secs").get<double>();
      for (const auto& [k, v] : s.at("losses").items()) snap.losses.emplace_back(k, v.get<double>());
      r.snapshots.push_back(std::move(snap));
    }
  }
  return r;
}

fs::path emit_frame(const fs::path& run_dir, int snapshot_index, const SampleBatch& X,
                    const SampleBatch& TX, const SampleBatch& Y) {
  require(X.size() == TX.size(), "emit_frame: source and mapped batches differ in size");
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%04d.csv", snapshot_index);
  const fs::path path = run_dir / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write frame " + path.string());
  out << "role,id,x0,x1\n";
  auto rows = [&out](std::string_view role, const SampleBatch& b) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      out << role << ',' << i << ',' << format_double(b[i].x0) << ',' << format_double(b[i].x1)
          << '\n';
    }
  };
  rows("src", X);
  rows("map", TX);
  rows("tgt", Y);
  if (!out) throw std::runtime_error("write failed for frame " + path.string());
  return path;
}

Recorder::Recorder(const GroundTruth& gt, RecorderOptions options)
    : gt_(gt), options_(std::move(options)) {
  schedule_ = snapshot_schedule(options_.total_steps, options_.snapshot_count);
  if (options_.run_dir) {
    fs::create_directories(*options_.run_dir);
    metrics_.open(*options_.run_dir / "metrics.csv");
    timings_.open(*options_.run_dir / "timings.csv");
    if (!metrics_ || !timings_) {
      throw std::runtime_error("cannot open metrics in " + options_.run_dir->string());
    }
    timings_ << "step,wall_secs\n";
  }
  const std::size_t nf = std::min(options_.frame_points, gt_.size());
  frame_x_.role = BatchRole::Source;
  frame_x_.points.assign(gt_.sources.begin(), gt_.sources.begin() + static_cast<long>(nf));
  frame_y_.role = BatchRole::Target;
  const std::size_t ny = std::min(options_.frame_points, gt_.target_samples.size());
  frame_y_.points.assign(gt_.target_samples.begin(),
                         gt_.target_samples.begin() + static_cast<long>(ny));
}

bool Recorder::due(std::int64_t step) const {
  return next_ < schedule_.size() && schedule_[next_] == step;
}

void Recorder::record(std::int64_t step, const MapFunction& map, const LossComponents& losses) {
  if (!due(step)) {
    throw PreconditionError("Recorder::record: step " + std::to_string(step) +
                            " is not the next scheduled snapshot");
  }
  clock_.stop();
  Snapshot s;
  s.step = step;
  s.t_over_T = options_.total_steps > 0
                   ? static_cast<double>(step) / static_cast<double>(options_.total_steps)
                   : 0.0;
  s.eps2 = epsilon2(map, gt_);
  s.wall_secs = clock_.seconds();
  s.losses = losses;
  if (!std::isfinite(s.eps2)) throw NumericalError("eps2 is not finite at step " + std::to_string(step));

  if (options_.run_dir) {
    if (snapshots_.empty()) {
      metrics_ << "step,t_over_T,eps2";
      for (const auto& [k, v] : losses) metrics_ << ',' << k;
      metrics_ << '\n';
    }
    metrics_ << s.step << ',' << format_double(s.t_over_T) << ',' << format_double(s.eps2);
    for (const auto& [k, v] : losses) metrics_ << ',' << format_double(v);
    metrics_ << '\n';
    metrics_.flush();
    timings_ << s.step << ',' << format_double(s.wall_secs) << '\n';
    timings_.flush();
    if (options_.write_frames && !frame_x_.empty()) {
      const Matrix tx = map(to_matrix(frame_x_));
      emit_frame(*options_.run_dir, static_cast<int>(next_), frame_x_,
                 from_matrix(tx, BatchRole::Mapped), frame_y_);
    }
  }
  snapshots_.push_back(std::move(s));
  ++next_;
  clock_.start();
}

EvalReport Recorder::finish() {
  clock_.stop();
  EvalReport r = finalize_report(snapshots_);
  r.stages = stages_;
  r.counters = counters_;
  return r;
}

}  // namespace neuralot
