// Command-line front end: ground-truth, run, summarize, list.

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "neuralot/errors.hpp"
#include "neuralot/runner.hpp"

namespace fs = std::filesystem;
using namespace neuralot;

namespace {

constexpr int kExitTrainingFailure = 1;
constexpr int kExitUsage = 2;

int cmd_ground_truth(const fs::path& out, std::size_t size, double epsilon, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const GroundTruth gt = build_ground_truth(size, epsilon, seed, SinkhornConfig{});
  write_ground_truth(gt, out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "ground truth: B=" << gt.size() << " eps=" << gt.epsilon
            << " sinkhorn_iterations=" << gt.sinkhorn_iterations
            << " marginal_error=" << gt.marginal_error << " secs=" << secs << '\n'
            << "written to " << (out / "ground_truth.csv").string() << '\n';
  return 0;
}

int cmd_run(const ResolveRequest& req) {
  const TrainRun run = resolve_config(req);
  std::cout << "running " << run.experiment_name << " (seed " << run.seed
            << ", T=" << run.settings.iterations << ") -> " << run.run_dir().string() << '\n';
  try {
    const RunResult r = run_experiment(run);
    std::cout << "min eps2 " << r.report.min_eps2 << " at t=" << r.report.t_min
              << ", sigma " << r.report.sigma_eps2_after_min << ", secs/step "
              << r.report.secs_per_step << '\n';
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    std::cerr << "training failed: " << e.what() << '\n'
              << "diagnostic written to " << (run.run_dir() / "report.json").string() << '\n';
    return kExitTrainingFailure;
  }
  return 0;
}

int cmd_summarize(const std::vector<std::string>& dirs, const std::string& out, bool csv) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const Summary s = summarize(paths);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  if (csv) {
    std::cout << summary_csv(s) << '\n' << timings_csv(s);
  } else {
    std::cout << summary_text(s);
  }
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream(fs::path(out) / "summary.csv") << summary_csv(s);
    std::ofstream(fs::path(out) / "summary_timings.csv") << timings_csv(s);
    std::ofstream(fs::path(out) / "summary.txt") << summary_text(s);
  }
  return 0;
}

int cmd_list() {
  for (const auto& name : registry_names()) {
    const TrainRun r = registry_preset(name);
    std::cout << name << '\t' << strategy_name(r.strategy) << "\tT=" << r.settings.iterations
              << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn optimal transport maps between 2D distributions with small networks"};
  app.require_subcommand(1);

  auto* gt = app.add_subcommand("ground-truth", "Build the ground-truth map sample");
  std::string gt_out = "runs";
  std::size_t gt_size = kDefaultGroundTruthSize;
  double gt_eps = kDefaultGroundTruthEpsilon;
  std::uint64_t gt_seed = GroundTruthSpec{}.seed;
  gt->add_option("--out", gt_out, "Output directory")->capture_default_str();
  gt->add_option("--size", gt_size, "Number of ground-truth pairs B")->capture_default_str();
  gt->add_option("--epsilon", gt_eps, "Sinkhorn regularization")->capture_default_str();
  gt->add_option("--seed", gt_seed, "Sampling seed")->capture_default_str();

  auto* run = app.add_subcommand("run", "Train one experiment");
  std::string name;
  std::string config_file;
  std::string run_out;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::int64_t iters = 0;
  run->add_option("name", name, "Registry name (see `list`)");
  auto* seed_opt = run->add_option("--seed", seed, "Random seed");
  auto* iters_opt = run->add_option("--iters", iters, "Override the number of steps T");
  auto* out_opt = run->add_option("--out", run_out, "Output root directory");
  run->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
  run->add_option("--override", overrides, "key=value override (repeatable)");

  auto* sum = app.add_subcommand("summarize", "Tabulate completed runs");
  std::vector<std::string> dirs;
  std::string sum_out;
  bool csv = false;
  sum->add_option("dirs", dirs, "Run directories")->required();
  sum->add_option("--out", sum_out, "Also write summary files here");
  sum->add_flag("--csv", csv, "Print CSV instead of aligned text");

  auto* list = app.add_subcommand("list", "List registry experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (gt->parsed()) return cmd_ground_truth(gt_out, gt_size, gt_eps, gt_seed);
    if (run->parsed()) {
      ResolveRequest req;
      if (!name.empty()) req.name = name;
      if (!config_file.empty()) req.config_file = config_file;
      req.overrides = overrides;
      if (*seed_opt) req.seed = seed;
      if (*iters_opt) req.iterations = iters;
      if (*out_opt) req.output_dir = run_out;
      return cmd_run(req);
    }
    if (sum->parsed()) return cmd_summarize(dirs, sum_out, csv);
    if (list->parsed()) return cmd_list();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTrainingFailure;
  }
  return kExitUsage;
}
