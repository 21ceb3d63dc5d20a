#pragma once

#include <cstdint>
#include <vector>

#include "neuralot/evaluation.hpp"
#include "neuralot/mlp.hpp"
#include "neuralot/optimizer.hpp"

namespace neuralot {

struct NetworkConfig {
  std::vector<int> hidden_dims{64, 64};
  Activation activation = Activation::Tanh;
};

// Settings shared by every trainer.
struct TrainSettings {
  std::int64_t iterations = 0;  // T
  std::size_t batch_x = 256;
  std::size_t batch_y = 256;
  NetworkConfig network;
  OptimizerConfig optimizer;
};

// Fresh i.i.d. batches from the source and target measures.
inline SampleBatch draw_source(std::size_t n, Rng& rng) { return sample_unit_ball(n, rng); }
inline SampleBatch draw_target(std::size_t n, Rng& rng) { return sample_four_balls(n, rng); }

// Per-step loss history kept in memory (the snapshots only see every T/S-th step).
struct LossTrace {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;

  void push(const LossComponents& c) {
    if (names.empty()) {
      for (const auto& [k, v] : c) names.push_back(k);
    }
    std::vector<double> row;
    row.reserve(c.size());
    for (const auto& [k, v] : c) row.push_back(v);
    rows.push_back(std::move(row));
  }
};

}  // namespace neuralot
