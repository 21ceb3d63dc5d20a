#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "neuralot/geometry.hpp"

namespace neuralot {

enum class Activation { Tanh, Relu, Softplus };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

// Flat parameter vector gradient, aligned index-for-index with Mlp::params().
using GradientVector = Vector;

// Intermediate values recorded by Mlp::forward for the reverse pass.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> activations;      // post-activation of each hidden layer
  std::vector<Matrix> pre_activations;  // affine output of each hidden layer
  bool valid = false;
};

struct Backprop {
  GradientVector params;  // d loss / d params
  Matrix input;           // d loss / d input, same shape as the forward input
};

// Fully connected network with an optional residual skip (output = x + f(x)).
//
// Samples are stored column-wise: forward() takes a (input_dim x N) matrix
// and returns (output_dim x N). Parameters live in a single flat vector; each
// layer k contributes its weight matrix (dims[k+1] x dims[k], column-major)
// followed by its bias (dims[k+1]).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_dims, Activation activation, bool skip_connection);

  const std::vector<int>& layer_dims() const { return dims_; }
  Activation activation() const { return activation_; }
  bool skip_connection() const { return skip_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return dims_.size() - 1; }
  Eigen::Index num_params() const { return params_.size(); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, ForwardCache& cache) const;

  // Exact reverse-mode gradient given d loss / d output at every sample.
  Backprop backward(const ForwardCache& cache, const Matrix& output_grad) const;

  // Convenience for a single 2D point.
  Point2 map_point(const Point2& p) const;

  // Offsets of the weight block and bias block of layer k inside params().
  Eigen::Index weight_offset(std::size_t layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<Eigen::Index>(dims_[layer]) * dims_[layer + 1];
  }

  static Eigen::Index param_count(const std::vector<int>& dims);

 private:
  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<const Vector> bias(std::size_t layer) const;

  std::vector<int> dims_;
  std::vector<Eigen::Index> offsets_;
  Activation activation_ = Activation::Tanh;
  bool skip_ = false;
  Vector params_;
};

// Random network: Glorot-uniform weights, biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Mlp make_mlp(int input_dim, const std::vector<int>& hidden_dims, int output_dim,
             Activation activation, bool skip_connection, Rng& rng);

// Map network equal to the identity at initialization: residual skip on and the
// final layer zeroed.
Mlp init_identity_map(const std::vector<int>& hidden_dims, Activation activation, Rng& rng,
                      int dim = 2);

// Scalar network that is identically zero at initialization.
Mlp init_zero_potential(const std::vector<int>& hidden_dims, Activation activation, Rng& rng,
                        int input_dim = 2);

// Scalar network identically equal to `value` at initialization (plans start
// at the product measure, i.e. rescaled density 1).
Mlp init_constant_output(int input_dim, const std::vector<int>& hidden_dims,
                         Activation activation, double value, Rng& rng);

// Versioned JSON checkpoint.
nlohmann::json to_json(const Mlp& model);
Mlp mlp_from_json(const nlohmann::json& j);
void save_checkpoint(const Mlp& model, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

inline constexpr int kCheckpointVersion = 1;

}  // namespace neuralot
