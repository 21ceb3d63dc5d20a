// Python bindings. Point sets cross the boundary as (n, 2) float64 arrays.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "neuralot/errors.hpp"
#include "neuralot/runner.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace neuralot;

namespace {

using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

RowPoints to_rows(const Matrix& cols) { return cols.transpose(); }
Matrix to_cols(const RowPoints& rows) { return rows.transpose(); }

RowPoints batch_rows(const SampleBatch& b) { return to_rows(to_matrix(b)); }

RowPoints points_rows(const std::vector<Point2>& p) {
  return batch_rows(SampleBatch{p, BatchRole::Source});
}

// JSON crosses as its text form and is decoded with the json module.
py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict solution_dict(const DiscreteOtSolution& s) {
  py::dict d;
  d["u"] = s.u_hat;
  d["v"] = s.v_hat;
  d["plan"] = s.plan;
  d["epsilon"] = s.epsilon;
  d["iterations"] = s.iterations_used;
  d["marginal_error"] = s.marginal_error;
  d["converged"] = s.converged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_neuralot, m) {
  m.doc() = "Optimal transport maps between 2D distributions learned with small networks";

  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "sample_unit_ball",
      [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return batch_rows(sample_unit_ball(n, rng));
      },
      py::arg("n"), py::arg("seed"), "Uniform samples on the unit disk, shape (n, 2).");
  m.def(
      "sample_four_balls",
      [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return batch_rows(sample_four_balls(n, rng));
      },
      py::arg("n"), py::arg("seed"), "Samples from four disks of radius 1/2 at (+-1, +-1).");

  m.def(
      "cost_matrix", [](const RowPoints& X, const RowPoints& Y) { return cost_matrix(to_cols(X), to_cols(Y)); },
      py::arg("X"), py::arg("Y"), "Squared Euclidean cost between rows of X and Y.");

  m.def(
      "sinkhorn",
      [](const Matrix& cost, const Vector& a, const Vector& b, double epsilon, int max_iterations,
         double tolerance) {
        SinkhornConfig cfg;
        cfg.epsilon = epsilon;
        cfg.max_iterations = max_iterations;
        cfg.tolerance = tolerance;
        return solution_dict(sinkhorn_log(cost, a, b, cfg));
      },
      py::arg("cost"), py::arg("a"), py::arg("b"), py::arg("epsilon") = 0.01,
      py::arg("max_iterations") = 10000, py::arg("tolerance") = 1e-6,
      "Log-domain Sinkhorn; potentials are returned in cost units with mean(u) = 0.");

  m.def(
      "brute_force_ot",
      [](const Matrix& cost, const Vector& a, const Vector& b) {
        const ExactOtResult r = brute_force_ot(cost, a, b);
        py::dict d;
        d["plan"] = r.plan;
        d["cost"] = r.cost;
        d["assignment"] = r.assignment;
        return d;
      },
      py::arg("cost"), py::arg("a"), py::arg("b"), "Exact OT on tiny instances by enumeration.");

  m.def(
      "ground_truth",
      [](std::size_t size, double epsilon, std::uint64_t seed) {
        const GroundTruth gt = build_ground_truth(size, epsilon, seed);
        py::dict d;
        d["sources"] = points_rows(gt.sources);
        d["targets"] = points_rows(gt.targets);
        d["target_samples"] = points_rows(gt.target_samples);
        d["sinkhorn_iterations"] = gt.sinkhorn_iterations;
        d["marginal_error"] = gt.marginal_error;
        return d;
      },
      py::arg("size") = kDefaultGroundTruthSize, py::arg("epsilon") = kDefaultGroundTruthEpsilon,
      py::arg("seed") = GroundTruthSpec{}.seed, "Reference pairs (X_i, T_opt(X_i)).");

  m.def("registry_names", &registry_names, "Names of the preset experiments.");
  m.def(
      "registry_preset", [](const std::string& name) { return to_python(to_json(registry_preset(name))); },
      py::arg("name"), "Fully resolved config of a preset, as a dict.");

  m.def(
      "run",
      [](std::optional<std::string> name, std::optional<py::object> config, std::optional<std::uint64_t> seed,
         std::optional<std::int64_t> iterations, std::optional<fs::path> out,
         std::vector<std::string> overrides) {
        ResolveRequest req;
        req.name = std::move(name);
        req.seed = seed;
        req.iterations = iterations;
        req.output_dir = std::move(out);
        req.overrides = std::move(overrides);
        TrainRun run = [&] {
          if (!config) return resolve_config(req);
          // An explicit config dict replaces the preset lookup.
          nlohmann::json j = from_python(*config);
          for (const auto& o : req.overrides) apply_override(j, o);
          TrainRun r = run_from_json(j);
          if (req.seed) r.seed = *req.seed;
          if (req.iterations) r.settings.iterations = *req.iterations;
          if (req.output_dir) r.output_dir = *req.output_dir;
          return r;
        }();
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(run);
        }
        py::dict d = to_python(to_json(r.report));
        d["run_dir"] = r.run_dir.string();
        return d;
      },
      py::arg("name") = py::none(), py::kw_only(), py::arg("config") = py::none(),
      py::arg("seed") = py::none(), py::arg("iterations") = py::none(), py::arg("out") = py::none(),
      py::arg("overrides") = std::vector<std::string>{},
      "Train one experiment and return its report (min_eps2, t_min, snapshots, ...).");

  m.def(
      "summarize",
      [](const std::vector<fs::path>& dirs) {
        const Summary s = summarize(dirs);
        py::dict d;
        d["csv"] = summary_csv(s);
        d["timings_csv"] = timings_csv(s);
        d["text"] = summary_text(s);
        d["warnings"] = s.warnings;
        return d;
      },
      py::arg("dirs"), "Tabulate completed run directories.");

  m.def(
      "apply_map",
      [](const fs::path& checkpoint, const RowPoints& X) {
        return to_rows(load_checkpoint(checkpoint).forward(to_cols(X)));
      },
      py::arg("checkpoint"), py::arg("X"), "Evaluate a saved map network on rows of X.");

  m.def(
      "epsilon2",
      [](const fs::path& checkpoint, std::size_t size, double epsilon, std::uint64_t seed) {
        const Mlp model = load_checkpoint(checkpoint);
        return epsilon2(model, build_ground_truth(size, epsilon, seed));
      },
      py::arg("checkpoint"), py::arg("size") = kDefaultGroundTruthSize,
      py::arg("epsilon") = kDefaultGroundTruthEpsilon, py::arg("seed") = GroundTruthSpec{}.seed,
      "Mean squared error of a saved map against the ground truth.");
}
