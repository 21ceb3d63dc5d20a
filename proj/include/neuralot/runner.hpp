#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "neuralot/config.hpp"

namespace neuralot {

// Loads <dir>/ground_truth.* when its size, epsilon and seed match, otherwise builds and
// writes it.
GroundTruth ensure_ground_truth(const std::filesystem::path& dir, const GroundTruthSpec& spec);

struct RunResult {
  EvalReport report;
  std::filesystem::path run_dir;
};

// Runs one experiment and writes config.json, metrics.csv, timings.csv,
// frames, checkpoints and report.json into run.run_dir(). A trainer failure
// is recorded in report.json ("status": "failed") and rethrown.
RunResult run_experiment(const TrainRun& run);

struct SummaryRow {
  std::string model;
  double min_eps2 = 0.0;
  double sigma_eps2 = 0.0;
  std::int64_t t_min = 0;
  std::int64_t T = 0;
};

struct TimingRow {
  std::string model;
  double secs_per_step = 0.0;
  double secs_to_tmin = 0.0;
};

struct Summary {
  std::vector<SummaryRow> rows;
  std::vector<TimingRow> timings;
  std::vector<std::string> warnings;
};

// Reads completed report.json files; directories without one are skipped
// with a warning. Throws when no run could be read.
Summary summarize(const std::vector<std::filesystem::path>& run_dirs);

std::string summary_csv(const Summary& s);
std::string timings_csv(const Summary& s);
std::string summary_text(const Summary& s);

}  // namespace neuralot
