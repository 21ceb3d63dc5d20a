#include "neuralot/runner.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "neuralot/errors.hpp"

namespace neuralot {

namespace fs = std::filesystem;
using nlohmann::json;

GroundTruth ensure_ground_truth(const fs::path& dir, const GroundTruthSpec& spec) {
  if (ground_truth_exists(dir)) {
    GroundTruth gt = read_ground_truth(dir);
    if (gt.size() == spec.size && gt.epsilon == spec.epsilon && gt.seed == spec.seed &&
        !gt.target_samples.empty()) {
      return gt;
    }
  }
  GroundTruth gt = build_ground_truth(spec.size, spec.epsilon, spec.seed, SinkhornConfig{});
  write_ground_truth(gt, dir);
  return gt;
}

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Clears a previous run in the same directory, keeping potential checkpoints
// when they are going to be reused.
void prepare_run_dir(const fs::path& dir, bool keep_potentials) {
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (keep_potentials && (name == "potential_u.json" || name == "potential_v.json")) continue;
      fs::remove_all(entry.path());
    }
  }
  fs::create_directories(dir);
}

EvalReport dispatch(const TrainRun& run, const GroundTruth& gt, const fs::path& dir, Rng& rng) {
  RecorderOptions ro;
  ro.total_steps = run.settings.iterations;
  ro.snapshot_count = run.snapshot_count;
  ro.run_dir = dir;
  ro.write_frames = run.write_frames;
  ro.frame_points = run.frame_points;
  Recorder recorder(gt, ro);

  return std::visit(
      [&](const auto& c) -> EvalReport {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, FlowSpec>) {
          FlowResult r = train_flow(FlowConfig{c.to_loss_kind()}, run.settings, rng, recorder);
          save_checkpoint(r.map, dir / "map.json");
          return r.report;
        } else if constexpr (std::is_same_v<C, AdversarialConfig>) {
          AdversarialResult r = train_adversarial(c, run.settings, rng, recorder);
          save_checkpoint(r.map, dir / "map.json");
          save_checkpoint(r.critic, dir / "critic.json");
          return r.report;
        } else if constexpr (std::is_same_v<C, DualConfig>) {
          const fs::path pu = dir / "potential_u.json";
          const fs::path pv = dir / "potential_v.json";
          Mlp u;
          Mlp v;
          if (c.reuse_potentials && fs::exists(pu) && fs::exists(pv)) {
            u = load_checkpoint(pu);
            v = load_checkpoint(pv);
            recorder.counters()["reused_potentials"] = true;
          } else {
            DualTrainResult d = train_dual(c, run.settings, rng);
            save_checkpoint(d.u, pu);
            save_checkpoint(d.v, pv);
            recorder.add_stage({"dual", c.dual_iterations, d.secs});
            if (!d.trace.rows.empty()) recorder.counters()["final_dual_loss"] = d.trace.rows.back()[0];
            u = std::move(d.u);
            v = std::move(d.v);
          }
          MapFitResult m = fit_map_from_potentials(u, v, c.regularization, c.epsilon, run.settings,
                                                   run.settings.iterations, rng, recorder);
          save_checkpoint(m.map, dir / "map.json");
          return m.report;
        } else {
          SupervisedConfig sc = c;
          if (run.dump_labels) sc.label_dump_dir = dir / "labels";
          SupervisedResult r = train_supervised(sc, run.settings, rng, recorder);
          save_checkpoint(r.map, dir / "map.json");
          if (r.u) save_checkpoint(*r.u, dir / "potential_u.json");
          if (r.v) save_checkpoint(*r.v, dir / "potential_v.json");
          if (r.plan) save_checkpoint(*r.plan, dir / "plan.json");
          return r.report;
        }
      },
      run.strategy);
}

}  // namespace

RunResult run_experiment(const TrainRun& run) {
  const fs::path dir = run.run_dir();
  const auto* dual = std::get_if<DualConfig>(&run.strategy);
  prepare_run_dir(dir, dual != nullptr && dual->reuse_potentials);
  write_json(dir / "config.json", to_json(run));
  json header{{"experiment_name", run.experiment_name},
              {"seed", run.seed},
              {"strategy", strategy_name(run.strategy)},
              {"T", run.settings.iterations}};
  try {
    const GroundTruth gt = ensure_ground_truth(run.output_dir, run.ground_truth);
    Rng rng(run.seed);
    EvalReport report = dispatch(run, gt, dir, rng);
    json j = header;
    j["status"] = "ok";
    j.update(to_json(report));
    write_json(dir / "report.json", j);
    return {std::move(report), dir};
  } catch (const std::exception& e) {
    json j = header;
    j["status"] = "failed";
    j["error"] = e.what();
    write_json(dir / "report.json", j);
    throw;
  }
}

Summary summarize(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw PreconditionError("summarize: no run directories given");
  struct Loaded {
    std::string name;
    std::uint64_t seed;
    std::int64_t T;
    EvalReport report;
  };
  std::vector<Loaded> runs;
  Summary s;
  for (const auto& dir : run_dirs) {
    const fs::path p = dir / "report.json";
    if (!fs::exists(p)) {
      s.warnings.push_back("skipping " + dir.string() + ": no report.json");
      continue;
    }
    try {
      std::ifstream in(p);
      const json j = json::parse(in);
      if (j.value("status", std::string()) != "ok") {
        s.warnings.push_back("skipping " + dir.string() + ": run did not complete");
        continue;
      }
      runs.push_back({j.at("experiment_name").get<std::string>(), j.value("seed", std::uint64_t{0}),
                      j.value("T", std::int64_t{0}), report_from_json(j)});
    } catch (const std::exception& e) {
      s.warnings.push_back("skipping " + dir.string() + ": " + e.what());
    }
  }
  if (runs.empty()) throw PreconditionError("summarize: no completed runs found");
  std::map<std::string, int> per_name;
  for (const auto& r : runs) ++per_name[r.name];
  for (const auto& r : runs) {
    const std::string model =
        per_name[r.name] > 1 ? r.name + "#" + std::to_string(r.seed) : r.name;
    s.rows.push_back({model, r.report.min_eps2, r.report.sigma_eps2_after_min, r.report.t_min, r.T});
    if (r.report.stages.empty()) {
      s.timings.push_back({model, r.report.secs_per_step, r.report.secs_to_tmin});
      continue;
    }
    for (const auto& st : r.report.stages) {
      const double sps = st.steps > 0 ? st.secs / static_cast<double>(st.steps) : 0.0;
      s.timings.push_back(
          {model + " (" + st.stage + ")", sps, sps * static_cast<double>(r.report.t_min)});
    }
    s.timings.push_back({model + " (map)", r.report.secs_per_step, r.report.secs_to_tmin});
  }
  return s;
}

std::string summary_csv(const Summary& s) {
  std::ostringstream out;
  out << "model,min_eps2,sigma_eps2,t_min,T\n";
  for (const auto& r : s.rows) {
    out << r.model << ',' << format_double(r.min_eps2) << ',' << format_double(r.sigma_eps2) << ','
        << r.t_min << ',' << r.T << '\n';
  }
  return out.str();
}

std::string timings_csv(const Summary& s) {
  std::ostringstream out;
  out << "model,secs_per_step,secs_to_tmin\n";
  for (const auto& r : s.timings) {
    out << r.model << ',' << format_double(r.secs_per_step) << ','
        << format_double(r.secs_to_tmin) << '\n';
  }
  return out.str();
}

namespace {

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

std::string aligned(const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == 0) {
        out << cells[c] << std::string(width[c] - cells[c].size(), ' ');
      } else {
        out << " | " << std::string(width[c] - cells[c].size(), ' ') << cells[c];
      }
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w + 3;
  out << std::string(total - 3, '-') << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

}  // namespace

std::string summary_text(const Summary& s) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : s.rows) {
    rows.push_back({r.model, fixed(r.min_eps2, 2), fixed(r.sigma_eps2, 3), std::to_string(r.t_min),
                    std::to_string(r.T)});
  }
  std::vector<std::vector<std::string>> trows;
  for (const auto& r : s.timings) {
    trows.push_back({r.model, fixed(r.secs_per_step, 5), fixed(r.secs_to_tmin, 2)});
  }
  return aligned({"model name", "eps2", "sigma(eps2)", "t_min", "T"}, rows) + "\n" +
         aligned({"model name", "secs per step", "secs to t_min"}, trows);
}

}  // namespace neuralot
