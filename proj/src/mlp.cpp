#include "neuralot/mlp.hpp"

#include <cmath>
#include <fstream>

#include "neuralot/errors.hpp"

namespace neuralot {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
    case Activation::Softplus:
      return "softplus";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "softplus") return Activation::Softplus;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected tanh|relu|softplus)");
}

namespace {

void apply_activation(Activation a, const Matrix& z, Matrix& h) {
  switch (a) {
    case Activation::Tanh:
      // Eigen's double tanh is scalar; this form vectorizes through exp and
      // saturates correctly at both ends (exp overflow gives exactly 1).
      h = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
      break;
    case Activation::Relu:
      h = z.array().max(0.0);
      break;
    case Activation::Softplus:
      // max(z, 0) + log1p(exp(-|z|))
      h = z.array().max(0.0) + (-z.array().abs()).exp().log1p();
      break;
  }
}

// g <- g * act'(z), using h = act(z) where convenient.
void scale_by_derivative(Activation a, const Matrix& z, const Matrix& h, Matrix& g) {
  switch (a) {
    case Activation::Tanh:
      g.array() *= 1.0 - h.array().square();
      break;
    case Activation::Relu:
      g.array() *= (z.array() > 0.0).cast<double>();
      break;
    case Activation::Softplus:
      g.array() *= 1.0 / (1.0 + (-z.array()).exp());
      break;
  }
}

}  // namespace

Eigen::Index Mlp::param_count(const std::vector<int>& dims) {
  Eigen::Index n = 0;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    n += static_cast<Eigen::Index>(dims[k] + 1) * dims[k + 1];
  }
  return n;
}

Mlp::Mlp(std::vector<int> layer_dims, Activation activation, bool skip_connection)
    : dims_(std::move(layer_dims)), activation_(activation), skip_(skip_connection) {
  require(dims_.size() >= 2, "Mlp: need at least input and output widths");
  for (int d : dims_) require(d > 0, "Mlp: layer widths must be positive");
  require(!skip_ || dims_.front() == dims_.back(),
          "Mlp: skip connection requires input dim == output dim");
  Eigen::Index off = 0;
  for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
    offsets_.push_back(off);
    off += static_cast<Eigen::Index>(dims_[k] + 1) * dims_[k + 1];
  }
  params_ = Vector::Zero(off);
}

Eigen::Map<const Matrix> Mlp::weight(std::size_t k) const {
  return {params_.data() + offsets_[k], dims_[k + 1], dims_[k]};
}

Eigen::Map<const Vector> Mlp::bias(std::size_t k) const {
  return {params_.data() + bias_offset(k), dims_[k + 1]};
}

Matrix Mlp::forward(const Matrix& input) const {
  require(input.rows() == input_dim(), "Mlp::forward: input has " +
                                           std::to_string(input.rows()) + " rows, expected " +
                                           std::to_string(input_dim()));
  const std::size_t L = num_layers();
  Matrix h = input;
  Matrix z;
  for (std::size_t k = 0; k < L; ++k) {
    z.noalias() = weight(k) * h;
    z.colwise() += bias(k);
    if (k + 1 < L) {
      apply_activation(activation_, z, h);
    }
  }
  if (skip_) z += input;
  return z;
}

Matrix Mlp::forward(const Matrix& input, ForwardCache& cache) const {
  require(input.rows() == input_dim(), "Mlp::forward: input has " +
                                           std::to_string(input.rows()) + " rows, expected " +
                                           std::to_string(input_dim()));
  const std::size_t L = num_layers();
  cache.input = input;
  cache.activations.resize(L - 1);
  cache.pre_activations.resize(L - 1);
  const Matrix* h = &cache.input;
  Matrix out;
  for (std::size_t k = 0; k < L; ++k) {
    if (k + 1 < L) {
      Matrix& z = cache.pre_activations[k];
      z.noalias() = weight(k) * *h;
      z.colwise() += bias(k);
      apply_activation(activation_, z, cache.activations[k]);
      h = &cache.activations[k];
    } else {
      out.noalias() = weight(k) * *h;
      out.colwise() += bias(k);
    }
  }
  if (skip_) out += input;
  cache.valid = true;
  return out;
}

Backprop Mlp::backward(const ForwardCache& cache, const Matrix& output_grad) const {
  if (!cache.valid) throw PreconditionError("Mlp::backward: forward cache missing");
  require(output_grad.rows() == output_dim() && output_grad.cols() == cache.input.cols(),
          "Mlp::backward: output gradient shape mismatch");
  const std::size_t L = num_layers();
  Backprop out;
  out.params = GradientVector::Zero(num_params());
  Matrix g = output_grad;
  for (std::size_t kk = L; kk-- > 0;) {
    const Matrix& h_in = kk == 0 ? cache.input : cache.activations[kk - 1];
    Eigen::Map<Matrix> dW(out.params.data() + offsets_[kk], dims_[kk + 1], dims_[kk]);
    Eigen::Map<Vector> db(out.params.data() + bias_offset(kk), dims_[kk + 1]);
    dW.noalias() = g * h_in.transpose();
    db = g.rowwise().sum();
    Matrix g_prev = weight(kk).transpose() * g;
    if (kk > 0) {
      scale_by_derivative(activation_, cache.pre_activations[kk - 1], cache.activations[kk - 1],
                          g_prev);
    }
    g = std::move(g_prev);
  }
  out.input = std::move(g);
  if (skip_) out.input += output_grad;
  return out;
}

Point2 Mlp::map_point(const Point2& p) const {
  require(input_dim() == 2 && output_dim() == 2, "Mlp::map_point: model is not a 2D map");
  Matrix in(2, 1);
  in << p.x0, p.x1;
  const Matrix out = forward(in);
  return {out(0, 0), out(1, 0)};
}

namespace {

void init_layer(Mlp& m, std::size_t k, Rng& rng) {
  const int fan_in = m.layer_dims()[k];
  const int fan_out = m.layer_dims()[k + 1];
  const double w_bound = std::sqrt(6.0 / (fan_in + fan_out));
  const double b_bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> w(-w_bound, w_bound);
  std::uniform_real_distribution<double> b(-b_bound, b_bound);
  Vector& p = m.params();
  const Eigen::Index w0 = m.weight_offset(k);
  const Eigen::Index b0 = m.bias_offset(k);
  for (Eigen::Index i = w0; i < b0; ++i) p[i] = w(rng);
  for (Eigen::Index i = b0; i < b0 + fan_out; ++i) p[i] = b(rng);
}

void zero_last_layer(Mlp& m) {
  const std::size_t k = m.num_layers() - 1;
  const Eigen::Index begin = m.weight_offset(k);
  m.params().segment(begin, m.num_params() - begin).setZero();
}

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

Mlp make_mlp(int input_dim, const std::vector<int>& hidden_dims, int output_dim,
             Activation activation, bool skip_connection, Rng& rng) {
  Mlp m(widths(input_dim, hidden_dims, output_dim), activation, skip_connection);
  for (std::size_t k = 0; k < m.num_layers(); ++k) init_layer(m, k, rng);
  return m;
}

Mlp init_identity_map(const std::vector<int>& hidden_dims, Activation activation, Rng& rng,
                      int dim) {
  Mlp m = make_mlp(dim, hidden_dims, dim, activation, true, rng);
  zero_last_layer(m);
  return m;
}

Mlp init_zero_potential(const std::vector<int>& hidden_dims, Activation activation, Rng& rng,
                        int input_dim) {
  Mlp m = make_mlp(input_dim, hidden_dims, 1, activation, false, rng);
  zero_last_layer(m);
  return m;
}

Mlp init_constant_output(int input_dim, const std::vector<int>& hidden_dims,
                         Activation activation, double value, Rng& rng) {
  Mlp m = make_mlp(input_dim, hidden_dims, 1, activation, false, rng);
  zero_last_layer(m);
  m.params()[m.num_params() - 1] = value;
  return m;
}

nlohmann::json to_json(const Mlp& model) {
  nlohmann::json j;
  j["format"] = "neuralot-mlp";
  j["version"] = kCheckpointVersion;
  j["layer_dims"] = model.layer_dims();
  j["activation"] = std::string(to_string(model.activation()));
  j["skip_connection"] = model.skip_connection();
  j["params"] = std::vector<double>(model.params().data(),
                                    model.params().data() + model.num_params());
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "neuralot-mlp") {
    throw ConfigError("checkpoint: not a neuralot-mlp record");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported version " + j.value("version", nlohmann::json()).dump());
  }
  Mlp m(j.at("layer_dims").get<std::vector<int>>(),
        activation_from_string(j.at("activation").get<std::string>()),
        j.at("skip_connection").get<bool>());
  const auto p = j.at("params").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(p.size()) != m.num_params()) {
    throw ConfigError("checkpoint: parameter count " + std::to_string(p.size()) +
                      " does not match layer_dims");
  }
  m.params() = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  return m;
}

void save_checkpoint(const Mlp& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << to_json(model).dump() << '\n';
  if (!out) throw std::runtime_error("write failed for checkpoint " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return mlp_from_json(nlohmann::json::parse(in));
}

}  // namespace neuralot
