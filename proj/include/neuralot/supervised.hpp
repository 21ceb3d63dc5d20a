#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include "neuralot/dual.hpp"
#include "neuralot/sinkhorn.hpp"

namespace neuralot {

enum class SupervisedKind { DualPotentials, TransportMap, PlanMatrix };
enum class LabelLoss { Absolute, Squared };

std::string_view to_string(SupervisedKind k);
std::string_view to_string(LabelLoss l);
SupervisedKind supervised_kind_from_string(std::string_view s);
LabelLoss label_loss_from_string(std::string_view s);

// Mean-zero representative of the gauge class: C = mean(u), (u - C, v + C).
std::pair<Vector, Vector> normalize_potentials(const Vector& u_hat, const Vector& v_hat);

struct ScalarLoss {
  double value = 0.0;
  Matrix grad;  // d value / d prediction, same shape as the prediction
};

// sum_i |u_i - u_hat_i| + sum_j |v_j - v_hat_j| (or squared). Gradients are
// returned as 1 x b rows for the two networks.
struct DualLabelLoss {
  double value = 0.0;
  Matrix grad_u;
  Matrix grad_v;
};

DualLabelLoss supervised_dual_loss(const Vector& u_pred, const Vector& v_pred,
                                   const Vector& u_label, const Vector& v_label,
                                   LabelLoss norm = LabelLoss::Absolute);

// (1 / b) sum_i |T(X_i) - T_hat_i|^2 over 2 x b matrices.
ScalarLoss supervised_map_loss(const Matrix& mapped, const Matrix& targets);

// (1 / (bX bY)) sum_ij (pi(X_i, Y_j) - bX bY plan_ij)^2. `scores` is bX x bY.
ScalarLoss supervised_plan_loss(const Matrix& scores, const Matrix& plan);

// 4 x (bX bY) inputs (x0, x1, y0, y1); column i * bY + j holds the pair (X_i, Y_j).
Matrix pair_inputs(const Matrix& X, const Matrix& Y);

// Evaluates the potential networks on the batch and uses the values as the
// initial dual vectors.
SinkhornConfig warm_start_from_networks(const Mlp& u, const Mlp& v, const Matrix& X,
                                        const Matrix& Y, SinkhornConfig base);

struct SupervisedConfig {
  SupervisedKind kind = SupervisedKind::TransportMap;
  double epsilon = 0.05;
  SinkhornConfig sinkhorn;  // epsilon is overwritten by `epsilon`
  // Fitting iterations per solved batch.
  int inner_iterations = 200;
  LabelLoss dual_loss = LabelLoss::Absolute;
  bool warm_start = false;
  // Pre-solved batches buffered ahead of the fitting loop; 0 is synchronous.
  int queue_depth = 4;
  // DualPotentials: supervised steps of the potential stage (the snapshotted
  // map stage runs settings.iterations steps).
  std::int64_t dual_iterations = 20000;
  // PlanMatrix: the plan network and its (smaller) pair batch.
  std::vector<int> plan_hidden{32, 32};
  std::size_t plan_batch = 32;
  std::optional<std::filesystem::path> label_dump_dir;
};

struct SupervisedResult {
  std::optional<Mlp> u;
  std::optional<Mlp> v;
  std::optional<Mlp> plan;
  Mlp map;
  EvalReport report;
  std::int64_t solved_batches = 0;
  std::int64_t skipped_batches = 0;
  double mean_sinkhorn_iterations = 0.0;
};

// One labelled batch produced by the Sinkhorn oracle.
struct LabelledBatch {
  Matrix X;
  Matrix Y;
  DiscreteOtSolution solution;  // potentials already normalized
  Matrix map_targets;           // 2 x bX barycentric targets
};

// Draws a batch and solves it; nullopt when Sinkhorn did not converge.
std::optional<LabelledBatch> make_labelled_batch(std::size_t bx, std::size_t by,
                                                 const SinkhornConfig& sinkhorn, Rng& rng,
                                                 const Mlp* warm_u = nullptr,
                                                 const Mlp* warm_v = nullptr);

SupervisedResult train_supervised(const SupervisedConfig& config, const TrainSettings& settings,
                                  Rng& rng, Recorder& recorder);

}  // namespace neuralot
