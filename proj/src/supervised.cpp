#include "neuralot/supervised.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include "neuralot/errors.hpp"

namespace neuralot {

std::string_view to_string(SupervisedKind k) {
  switch (k) {
    case SupervisedKind::DualPotentials: return "dual";
    case SupervisedKind::TransportMap: return "map";
    case SupervisedKind::PlanMatrix: return "plan";
  }
  return "?";
}

std::string_view to_string(LabelLoss l) { return l == LabelLoss::Absolute ? "abs" : "squared"; }

SupervisedKind supervised_kind_from_string(std::string_view s) {
  if (s == "dual") return SupervisedKind::DualPotentials;
  if (s == "map") return SupervisedKind::TransportMap;
  if (s == "plan") return SupervisedKind::PlanMatrix;
  throw ConfigError("unknown supervised target '" + std::string(s) + "' (expected dual|map|plan)");
}

LabelLoss label_loss_from_string(std::string_view s) {
  if (s == "abs") return LabelLoss::Absolute;
  if (s == "squared") return LabelLoss::Squared;
  throw ConfigError("unknown label loss '" + std::string(s) + "' (expected abs|squared)");
}

std::pair<Vector, Vector> normalize_potentials(const Vector& u_hat, const Vector& v_hat) {
  require(u_hat.size() > 0, "normalize_potentials: empty u");
  const double c = u_hat.mean();
  return {u_hat.array() - c, v_hat.array() + c};
}

namespace {

Matrix label_residual_grad(const Vector& r, LabelLoss norm) {
  Matrix g(1, r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    g(0, i) = norm == LabelLoss::Absolute ? static_cast<double>((r[i] > 0.0) - (r[i] < 0.0))
                                          : 2.0 * r[i];
  }
  return g;
}

double label_residual_value(const Vector& r, LabelLoss norm) {
  return norm == LabelLoss::Absolute ? r.cwiseAbs().sum() : r.squaredNorm();
}

}  // namespace

DualLabelLoss supervised_dual_loss(const Vector& u_pred, const Vector& v_pred,
                                   const Vector& u_label, const Vector& v_label, LabelLoss norm) {
  require(u_pred.size() == u_label.size() && v_pred.size() == v_label.size(),
          "supervised_dual_loss: predictions and labels are not aligned");
  const Vector ru = u_pred - u_label;
  const Vector rv = v_pred - v_label;
  return {label_residual_value(ru, norm) + label_residual_value(rv, norm),
          label_residual_grad(ru, norm), label_residual_grad(rv, norm)};
}

ScalarLoss supervised_map_loss(const Matrix& mapped, const Matrix& targets) {
  require(mapped.rows() == targets.rows() && mapped.cols() == targets.cols() && mapped.cols() > 0,
          "supervised_map_loss: shape mismatch");
  const Matrix d = mapped - targets;
  const double inv = 1.0 / static_cast<double>(mapped.cols());
  return {d.squaredNorm() * inv, 2.0 * inv * d};
}

ScalarLoss supervised_plan_loss(const Matrix& scores, const Matrix& plan) {
  require(scores.rows() == plan.rows() && scores.cols() == plan.cols() && scores.size() > 0,
          "supervised_plan_loss: shape mismatch");
  const double n = static_cast<double>(plan.size());
  const Matrix d = scores - n * plan;
  return {d.squaredNorm() / n, (2.0 / n) * d};
}

Matrix pair_inputs(const Matrix& X, const Matrix& Y) {
  const Eigen::Index bx = X.cols();
  const Eigen::Index by = Y.cols();
  Matrix P(4, bx * by);
  for (Eigen::Index i = 0; i < bx; ++i) {
    P.block(0, i * by, 2, by) = X.col(i).replicate(1, by);
    P.block(2, i * by, 2, by) = Y;
  }
  return P;
}

SinkhornConfig warm_start_from_networks(const Mlp& u, const Mlp& v, const Matrix& X,
                                        const Matrix& Y, SinkhornConfig base) {
  base.warm_start = WarmStart{u.forward(X).row(0).transpose(), v.forward(Y).row(0).transpose()};
  return base;
}

std::optional<LabelledBatch> make_labelled_batch(std::size_t bx, std::size_t by,
                                                 const SinkhornConfig& sinkhorn, Rng& rng,
                                                 const Mlp* warm_u, const Mlp* warm_v) {
  LabelledBatch b;
  b.X = to_matrix(draw_source(bx, rng));
  b.Y = to_matrix(draw_target(by, rng));
  const SinkhornConfig cfg = warm_u != nullptr && warm_v != nullptr
                                 ? warm_start_from_networks(*warm_u, *warm_v, b.X, b.Y, sinkhorn)
                                 : sinkhorn;
  const Vector a = uniform_weights(b.X.cols());
  b.solution = sinkhorn_log(cost_matrix(b.X, b.Y), a, uniform_weights(b.Y.cols()), cfg);
  if (!b.solution.converged) return std::nullopt;
  auto [u, v] = normalize_potentials(b.solution.u_hat, b.solution.v_hat);
  b.solution.u_hat = std::move(u);
  b.solution.v_hat = std::move(v);
  b.map_targets = (b.Y * b.solution.plan.transpose()).array().rowwise() / a.transpose().array();
  return b;
}

namespace {

// Bounded FIFO of solved batches. With depth 0 batches are produced on demand
// in the calling thread.
class LabelPipeline {
 public:
  using Item = std::optional<LabelledBatch>;
  using Producer = std::function<Item()>;

  LabelPipeline(Producer producer, int depth) : producer_(std::move(producer)), depth_(depth) {
    if (depth_ > 0) worker_ = std::thread([this] { run(); });
  }

  ~LabelPipeline() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  LabelPipeline(const LabelPipeline&) = delete;
  LabelPipeline& operator=(const LabelPipeline&) = delete;

  Item next() {
    if (depth_ == 0) return producer_();
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return !queue_.empty() || error_; });
    if (queue_.empty()) std::rethrow_exception(error_);
    std::unique_ptr<LabelledBatch> item = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    if (!item) return std::nullopt;
    return std::move(*item);
  }

 private:
  void run() {
    try {
      while (true) {
        {
          std::unique_lock lock(mu_);
          cv_.wait(lock, [this] { return stop_ || static_cast<int>(queue_.size()) < depth_; });
          if (stop_) return;
        }
        Item item = producer_();
        std::lock_guard lock(mu_);
        queue_.push_back(item ? std::make_unique<LabelledBatch>(std::move(*item)) : nullptr);
        cv_.notify_all();
      }
    } catch (...) {
      std::lock_guard lock(mu_);
      error_ = std::current_exception();
      cv_.notify_all();
    }
  }

  Producer producer_;
  int depth_;
  std::thread worker_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::unique_ptr<LabelledBatch>> queue_;  // null marks a skipped batch
  std::exception_ptr error_;
  bool stop_ = false;
};

constexpr int kMaxConsecutiveSkips = 50;

void dump_labels(const std::filesystem::path& dir, std::int64_t index, SupervisedKind kind,
                 const LabelledBatch& b) {
  std::filesystem::create_directories(dir);
  char name[32];
  std::snprintf(name, sizeof(name), "labels_%05lld.csv", static_cast<long long>(index));
  std::ofstream out(dir / name);
  switch (kind) {
    case SupervisedKind::DualPotentials:
      out << "side,index,label\n";
      for (Eigen::Index i = 0; i < b.solution.u_hat.size(); ++i) {
        out << "u," << i << ',' << format_double(b.solution.u_hat[i]) << '\n';
      }
      for (Eigen::Index j = 0; j < b.solution.v_hat.size(); ++j) {
        out << "v," << j << ',' << format_double(b.solution.v_hat[j]) << '\n';
      }
      break;
    case SupervisedKind::TransportMap:
      out << "i,t0,t1\n";
      for (Eigen::Index i = 0; i < b.map_targets.cols(); ++i) {
        out << i << ',' << format_double(b.map_targets(0, i)) << ','
            << format_double(b.map_targets(1, i)) << '\n';
      }
      break;
    case SupervisedKind::PlanMatrix:
      out << "i,j,label\n";
      for (Eigen::Index i = 0; i < b.solution.plan.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.solution.plan.cols(); ++j) {
          out << i << ',' << j << ',' << format_double(b.solution.plan(i, j)) << '\n';
        }
      }
      break;
  }
}

// Scores of the plan network on all pairs as a bX x bY matrix.
Matrix plan_scores(const Mlp& plan, const Matrix& pairs, Eigen::Index bx, Eigen::Index by,
                   ForwardCache* cache) {
  const Matrix flat = cache != nullptr ? plan.forward(pairs, *cache) : plan.forward(pairs);
  return Eigen::Map<const Matrix>(flat.data(), by, bx).transpose();
}

Matrix flatten_pair_grad(const Matrix& g) {
  const Matrix gt = g.transpose();
  return Eigen::Map<const Matrix>(gt.data(), 1, gt.size());
}

}  // namespace

SupervisedResult train_supervised(const SupervisedConfig& config, const TrainSettings& settings,
                                  Rng& rng, Recorder& recorder) {
  require(config.epsilon >= kMinRecommendedEpsilon, "train_supervised: epsilon must be >= 0.005");
  require(config.inner_iterations >= 1, "train_supervised: inner_iterations must be >= 1");
  require(config.queue_depth >= 0, "train_supervised: queue_depth must be >= 0");
  const auto& net = settings.network;
  SinkhornConfig sink = config.sinkhorn;
  sink.epsilon = config.epsilon;
  sink.warm_start.reset();

  SupervisedResult result;
  const bool plan_kind = config.kind == SupervisedKind::PlanMatrix;
  const bool dual_kind = config.kind == SupervisedKind::DualPotentials;
  const std::size_t bx = plan_kind ? config.plan_batch : settings.batch_x;
  const std::size_t by = plan_kind ? config.plan_batch : settings.batch_y;

  // Networks are created before the label stream so that initialization does
  // not depend on the pipeline.
  if (dual_kind) {
    result.u = init_zero_potential(net.hidden_dims, net.activation, rng);
    result.v = init_zero_potential(net.hidden_dims, net.activation, rng);
  }
  if (plan_kind) {
    result.plan = init_constant_output(4, config.plan_hidden, net.activation, 1.0, rng);
  }
  result.map = init_identity_map(net.hidden_dims, net.activation, rng);
  Rng label_rng(rng());

  // Warm starts read the networks being trained, so they force synchronous mode.
  const bool warm = config.warm_start && dual_kind;
  const int depth = warm ? 0 : config.queue_depth;
  const Mlp* wu = warm ? &*result.u : nullptr;
  const Mlp* wv = warm ? &*result.v : nullptr;
  LabelPipeline pipeline(
      [&, wu, wv] { return make_labelled_batch(bx, by, sink, label_rng, wu, wv); }, depth);

  double sinkhorn_iterations = 0.0;
  std::int64_t consecutive_skips = 0;
  auto next_batch = [&]() -> LabelledBatch {
    while (true) {
      std::optional<LabelledBatch> b = pipeline.next();
      if (b) {
        consecutive_skips = 0;
        sinkhorn_iterations += b->solution.iterations_used;
        if (config.label_dump_dir) {
          dump_labels(*config.label_dump_dir, result.solved_batches, config.kind, *b);
        }
        ++result.solved_batches;
        return std::move(*b);
      }
      ++result.skipped_batches;
      if (++consecutive_skips >= kMaxConsecutiveSkips) {
        throw NumericalError("train_supervised: Sinkhorn failed to converge on " +
                             std::to_string(consecutive_skips) + " consecutive batches");
      }
    }
  };

  auto finish_counters = [&] {
    result.mean_sinkhorn_iterations =
        result.solved_batches > 0 ? sinkhorn_iterations / static_cast<double>(result.solved_batches)
                                  : 0.0;
    recorder.counters()["solved_batches"] = result.solved_batches;
    recorder.counters()["skipped_batches"] = result.skipped_batches;
    recorder.counters()["mean_sinkhorn_iterations"] = result.mean_sinkhorn_iterations;
  };

  if (dual_kind) {
    Mlp& u = *result.u;
    Mlp& v = *result.v;
    Optimizer opt_u(settings.optimizer, u.num_params());
    Optimizer opt_v(settings.optimizer, v.num_params());
    Stopwatch clock;
    clock.start();
    std::int64_t t = 0;
    while (t < config.dual_iterations) {
      const LabelledBatch b = next_batch();
      for (int k = 0; k < config.inner_iterations && t < config.dual_iterations; ++k, ++t) {
        ForwardCache cu;
        ForwardCache cv;
        const Vector up = u.forward(b.X, cu).row(0).transpose();
        const Vector vp = v.forward(b.Y, cv).row(0).transpose();
        const DualLabelLoss loss =
            supervised_dual_loss(up, vp, b.solution.u_hat, b.solution.v_hat, config.dual_loss);
        opt_u.step(u, u.backward(cu, loss.grad_u).params, "supervised dual loss (u)");
        opt_v.step(v, v.backward(cv, loss.grad_v).params, "supervised dual loss (v)");
      }
    }
    clock.stop();
    recorder.add_stage({"dual", config.dual_iterations, clock.seconds()});
    finish_counters();
    MapFitResult fit = fit_map_from_potentials(u, v, Regularization::Entropic, config.epsilon,
                                               settings, settings.iterations, rng, recorder);
    result.map = std::move(fit.map);
    result.report = std::move(fit.report);
    return result;
  }

  Mlp& map = result.map;
  Optimizer map_opt(settings.optimizer, map.num_params());
  std::optional<Optimizer> plan_opt;
  if (plan_kind) plan_opt.emplace(settings.optimizer, result.plan->num_params());
  const MapFunction map_fn = as_map_function(map);
  const Eigen::Index pbx = static_cast<Eigen::Index>(bx);
  const Eigen::Index pby = static_cast<Eigen::Index>(by);

  recorder.start();
  if (recorder.due(0)) recorder.record(0, map_fn, {});
  std::int64_t t = 0;
  while (t < settings.iterations) {
    const LabelledBatch b = next_batch();
    const Matrix pairs = plan_kind ? pair_inputs(b.X, b.Y) : Matrix();
    for (int k = 0; k < config.inner_iterations && t < settings.iterations; ++k) {
      ++t;
      LossComponents comps;
      if (plan_kind) {
        Mlp& plan = *result.plan;
        ForwardCache pc;
        const ScalarLoss pl =
            supervised_plan_loss(plan_scores(plan, pairs, pbx, pby, &pc), b.solution.plan);
        plan_opt->step(plan, plan.backward(pc, flatten_pair_grad(pl.grad)).params,
                       "supervised plan loss");
        // The map regresses on the plan network's conditional weights on fresh pairs.
        const Matrix Xm = to_matrix(draw_source(bx, rng));
        const Matrix Ym = to_matrix(draw_target(by, rng));
        ConditionalWeights w;
        w.weights = plan_scores(plan, pair_inputs(Xm, Ym), pbx, pby, nullptr).cwiseMax(0.0);
        w.empty_rows.assign(bx, false);
        for (Eigen::Index i = 0; i < pbx; ++i) {
          const double z = w.weights.row(i).sum();
          if (z > 0.0) {
            w.weights.row(i) /= z;
          } else {
            w.empty_rows[static_cast<std::size_t>(i)] = true;
          }
        }
        ForwardCache mc;
        const BarycentricLoss ml = barycentric_regression_loss(map.forward(Xm, mc), Ym, w);
        if (ml.used_rows > 0) {
          map_opt.step(map, map.backward(mc, ml.grad).params, "supervised map loss");
        }
        comps = {{"plan_loss", pl.value}, {"map_loss", ml.value}};
      } else {
        ForwardCache mc;
        const ScalarLoss ml = supervised_map_loss(map.forward(b.X, mc), b.map_targets);
        map_opt.step(map, map.backward(mc, ml.grad).params, "supervised map loss");
        comps = {{"map_loss", ml.value}};
      }
      if (recorder.due(t)) recorder.record(t, map_fn, comps);
    }
  }
  finish_counters();
  result.report = recorder.finish();
  return result;
}

}  // namespace neuralot
