#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ser/batcher.hpp"
#include "ser/corpus.hpp"

namespace ser {

// Dense row-major matrix used inside the model.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double* row(std::size_t r) { return data.data() + r * cols; }

  static Matrix from_features(const FeatureMatrix& f);
  bool operator==(const Matrix&) const = default;
};

// y = W x + b with W stored out x in.
struct Affine {
  Matrix weight;
  std::vector<double> bias;

  Affine() = default;
  Affine(std::size_t in, std::size_t out) : weight(out, in), bias(out, 0.0) {}
  std::size_t in() const { return weight.cols; }
  std::size_t out() const { return weight.rows; }
  bool operator==(const Affine&) const = default;
};

// Per-head centers (H x D) and sharpness values (H, kept positive).
struct AttentionParams {
  Matrix mu;
  std::vector<double> s;

  std::size_t heads() const { return mu.rows; }
  std::size_t dim() const { return mu.cols; }
  bool operator==(const AttentionParams&) const = default;
};

inline constexpr double kMinSharpness = 1e-6;

struct ModelConfig {
  std::size_t input_dim = 23;
  std::size_t hidden_dim = 64;
  std::size_t encoder_dim = 32;
  std::size_t heads = 32;
  std::size_t embedding_dim = 64;
  std::size_t num_classes = 4;
};

struct ModelParams {
  Affine encoder_hidden;  // input -> hidden, ReLU
  Affine encoder_out;     // hidden -> frame vector x_t (linear)
  AttentionParams attention;
  Affine head_fc;         // H*D -> embedding, ReLU
  Affine out_fc;          // embedding -> logits

  ModelConfig config() const;
  // Shape-compatible copy filled with zeros (gradient / optimizer buffers).
  ModelParams zeros_like() const;
  bool operator==(const ModelParams&) const = default;
};

// Declaration-order walk over every parameter tensor. Used by the optimizer,
// checkpoints and gradient checks.
struct TensorView {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::span<double> values;
};
std::vector<TensorView> tensors(ModelParams& params);
std::vector<std::pair<std::string, std::span<const double>>> tensors(const ModelParams& params);

void validate(const ModelParams& params);

// s = 1, mu ~ N(0, 0.1^2), affine weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// w[h][t] = softmax over t of -s_h * ||x_t - mu_h||.
Matrix attention_weights(const Matrix& frames, const AttentionParams& params);
// e_h = sum_t w[h][t] x_t.
Matrix attention_pool(const Matrix& frames, const Matrix& weights);

Matrix encode_frames(const Matrix& input, const ModelParams& params);
std::vector<double> forward(const FeatureMatrix& feats, const ModelParams& params);
std::vector<double> softmax(std::span<const double> logits);

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grads;
};

// Mean cross-entropy over the batch with analytic gradients for every tensor.
LossAndGrad loss_and_grad(std::span<const Example> batch, const LabelSet& labels,
                          const ModelParams& params);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const ModelParams& like, AdamConfig config);
  // Applies one update; sharpness values are then clamped to kMinSharpness.
  void step(ModelParams& params, const ModelParams& grads);
  std::uint64_t steps() const { return step_; }

 private:
  AdamConfig config_;
  ModelParams m_;
  ModelParams v_;
  std::uint64_t step_ = 0;
};

std::size_t predict(const FeatureMatrix& feats, const ModelParams& params);

// Checkpoint: magic, version, label set, tensor shape table, then every
// parameter as little-endian float64 in declaration order.
void save_checkpoint(const ModelParams& params, const LabelSet& labels,
                     const std::filesystem::path& path);
struct Checkpoint {
  ModelParams params;
  LabelSet labels;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Output-size column of the full ResNet reference architecture for an input
// of `frames` frames.
struct StageShape {
  std::string component;
  std::string layer;
  std::vector<std::size_t> dims;

  std::string size_string() const;  // e.g. "80x12"
};
std::vector<StageShape> validate_table1_shapes(std::size_t frames, std::size_t num_classes);

}  // namespace ser
