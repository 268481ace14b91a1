#include "ser/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ser/error.hpp"
#include "ser/rng.hpp"

namespace ser {

Matrix Matrix::from_features(const FeatureMatrix& f) {
  Matrix m;
  m.rows = f.rows;
  m.cols = f.cols;
  m.data = f.values;
  return m;
}

ModelConfig ModelParams::config() const {
  ModelConfig c;
  c.input_dim = encoder_hidden.in();
  c.hidden_dim = encoder_hidden.out();
  c.encoder_dim = encoder_out.out();
  c.heads = attention.heads();
  c.embedding_dim = head_fc.out();
  c.num_classes = out_fc.out();
  return c;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (auto& t : tensors(z)) std::fill(t.values.begin(), t.values.end(), 0.0);
  return z;
}

std::vector<TensorView> tensors(ModelParams& p) {
  auto mat = [](const char* name, Matrix& m) {
    return TensorView{name, m.rows, m.cols, std::span<double>(m.data)};
  };
  auto vec = [](const char* name, std::vector<double>& v) {
    return TensorView{name, v.size(), 1, std::span<double>(v)};
  };
  return {
      mat("encoder_hidden.weight", p.encoder_hidden.weight),
      vec("encoder_hidden.bias", p.encoder_hidden.bias),
      mat("encoder_out.weight", p.encoder_out.weight),
      vec("encoder_out.bias", p.encoder_out.bias),
      mat("attention.mu", p.attention.mu),
      vec("attention.s", p.attention.s),
      mat("head_fc.weight", p.head_fc.weight),
      vec("head_fc.bias", p.head_fc.bias),
      mat("out_fc.weight", p.out_fc.weight),
      vec("out_fc.bias", p.out_fc.bias),
  };
}

std::vector<std::pair<std::string, std::span<const double>>> tensors(const ModelParams& params) {
  std::vector<std::pair<std::string, std::span<const double>>> out;
  for (auto& t : tensors(const_cast<ModelParams&>(params))) {
    out.emplace_back(t.name, std::span<const double>(t.values.data(), t.values.size()));
  }
  return out;
}

void validate(const ModelParams& p) {
  const bool chained = p.encoder_hidden.out() == p.encoder_out.in() &&
                       p.encoder_out.out() == p.attention.dim() &&
                       p.attention.s.size() == p.attention.heads() &&
                       p.head_fc.in() == p.attention.heads() * p.attention.dim() &&
                       p.head_fc.out() == p.out_fc.in() &&
                       p.encoder_hidden.bias.size() == p.encoder_hidden.out() &&
                       p.encoder_out.bias.size() == p.encoder_out.out() &&
                       p.head_fc.bias.size() == p.head_fc.out() &&
                       p.out_fc.bias.size() == p.out_fc.out();
  if (!chained) throw Error(ErrorCode::kShapeMismatch, "model layer shapes do not chain");
  for (const auto& [name, values] : tensors(p)) {
    for (double v : values) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kNumerical, name + " has a non-finite value");
    }
  }
  for (double s : p.attention.s) {
    if (!(s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "attention sharpness must be positive");
  }
}

ModelParams init_params(const ModelConfig& c, std::uint64_t seed) {
  if (c.input_dim == 0 || c.hidden_dim == 0 || c.encoder_dim == 0 || c.heads == 0 ||
      c.embedding_dim == 0 || c.num_classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "model dimensions must be positive (>= 2 classes)");
  }
  Rng rng(seed);
  auto init_affine = [&](std::size_t in, std::size_t out) {
    Affine a(in, out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : a.weight.data) w = dist(rng);
    return a;
  };
  ModelParams p;
  p.encoder_hidden = init_affine(c.input_dim, c.hidden_dim);
  p.encoder_out = init_affine(c.hidden_dim, c.encoder_dim);
  p.attention.mu = Matrix(c.heads, c.encoder_dim);
  std::normal_distribution<double> gauss(0.0, 0.1);
  for (double& m : p.attention.mu.data) m = gauss(rng);
  p.attention.s.assign(c.heads, 1.0);
  p.head_fc = init_affine(c.heads * c.encoder_dim, c.embedding_dim);
  p.out_fc = init_affine(c.embedding_dim, c.num_classes);
  return p;
}

namespace {

void affine_rows(const Matrix& in, const Affine& a, Matrix& out) {
  out = Matrix(in.rows, a.out());
  const std::size_t n_in = a.in();
  for (std::size_t t = 0; t < in.rows; ++t) {
    const double* x = in.row(t);
    double* y = out.row(t);
    for (std::size_t o = 0; o < a.out(); ++o) {
      const double* w = a.weight.row(o);
      double acc = a.bias[o];
      for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
  }
}

std::vector<double> affine_vec(std::span<const double> x, const Affine& a) {
  std::vector<double> y(a.out());
  for (std::size_t o = 0; o < a.out(); ++o) {
    const double* w = a.weight.row(o);
    double acc = a.bias[o];
    for (std::size_t i = 0; i < a.in(); ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
  return y;
}

double distance(const double* x, const double* mu, std::size_t d) {
  double acc = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = x[k] - mu[k];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

Matrix attention_with_distances(const Matrix& frames, const AttentionParams& params,
                                Matrix* distances) {
  if (frames.rows == 0) throw Error(ErrorCode::kEmptyInput, "attention over zero frames");
  if (frames.cols != params.dim()) {
    throw Error(ErrorCode::kShapeMismatch, "frame width differs from attention center width");
  }
  const std::size_t heads = params.heads();
  const std::size_t steps = frames.rows;
  Matrix w(heads, steps);
  Matrix dist(heads, steps);
  for (std::size_t h = 0; h < heads; ++h) {
    const double* mu = params.mu.row(h);
    double min_d = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < steps; ++t) {
      dist(h, t) = distance(frames.row(t), mu, frames.cols);
      min_d = std::min(min_d, dist(h, t));
    }
    // Largest exponent is -s*min_d; subtract it before exponentiating.
    const double s = params.s[h];
    double total = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      w(h, t) = std::exp(-s * (dist(h, t) - min_d));
      total += w(h, t);
    }
    for (std::size_t t = 0; t < steps; ++t) w(h, t) /= total;
  }
  if (distances != nullptr) *distances = std::move(dist);
  return w;
}

struct Trace {
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
  Matrix frames;
  Matrix dist;
  Matrix weights;
  std::vector<double> pooled;
  std::vector<double> embedding_pre;
  std::vector<double> embedding;
  std::vector<double> logits;
};

void run_forward(const FeatureMatrix& feats, const ModelParams& p, Trace& tr) {
  if (feats.cols != p.encoder_hidden.in()) {
    throw Error(ErrorCode::kShapeMismatch, "feature width " + std::to_string(feats.cols) +
                                               " differs from model input width " +
                                               std::to_string(p.encoder_hidden.in()));
  }
  tr.input = Matrix::from_features(feats);
  affine_rows(tr.input, p.encoder_hidden, tr.hidden_pre);
  tr.hidden = tr.hidden_pre;
  for (double& v : tr.hidden.data) v = std::max(v, 0.0);
  affine_rows(tr.hidden, p.encoder_out, tr.frames);
  tr.weights = attention_with_distances(tr.frames, p.attention, &tr.dist);
  Matrix pooled = attention_pool(tr.frames, tr.weights);
  tr.pooled = std::move(pooled.data);
  tr.embedding_pre = affine_vec(tr.pooled, p.head_fc);
  tr.embedding = tr.embedding_pre;
  for (double& v : tr.embedding) v = std::max(v, 0.0);
  tr.logits = affine_vec(tr.embedding, p.out_fc);
}

void add_outer(Affine& g, std::span<const double> dy, std::span<const double> x) {
  for (std::size_t o = 0; o < g.out(); ++o) {
    if (dy[o] == 0.0) continue;
    double* w = g.weight.row(o);
    for (std::size_t i = 0; i < g.in(); ++i) w[i] += dy[o] * x[i];
    g.bias[o] += dy[o];
  }
}

std::vector<double> back_vec(const Affine& a, std::span<const double> dy) {
  std::vector<double> dx(a.in(), 0.0);
  for (std::size_t o = 0; o < a.out(); ++o) {
    if (dy[o] == 0.0) continue;
    const double* w = a.weight.row(o);
    for (std::size_t i = 0; i < a.in(); ++i) dx[i] += w[i] * dy[o];
  }
  return dx;
}

// Accumulates parameter gradients of the per-frame affine layer and returns
// the gradient with respect to its input rows.
Matrix back_rows(const Affine& a, Affine& g, const Matrix& in, const Matrix& dy) {
  Matrix dx(in.rows, a.in());
  for (std::size_t t = 0; t < in.rows; ++t) {
    const double* x = in.row(t);
    const double* d = dy.row(t);
    double* out = dx.row(t);
    for (std::size_t o = 0; o < a.out(); ++o) {
      if (d[o] == 0.0) continue;
      const double* w = a.weight.row(o);
      double* gw = g.weight.row(o);
      for (std::size_t i = 0; i < a.in(); ++i) {
        gw[i] += d[o] * x[i];
        out[i] += w[i] * d[o];
      }
      g.bias[o] += d[o];
    }
  }
  return dx;
}

void run_backward(const Trace& tr, const ModelParams& p, std::span<const double> dlogits,
                  ModelParams& g) {
  add_outer(g.out_fc, dlogits, tr.embedding);
  std::vector<double> demb = back_vec(p.out_fc, dlogits);
  for (std::size_t e = 0; e < demb.size(); ++e) {
    if (tr.embedding_pre[e] <= 0.0) demb[e] = 0.0;
  }
  add_outer(g.head_fc, demb, tr.pooled);
  const std::vector<double> dpooled = back_vec(p.head_fc, demb);

  const std::size_t heads = p.attention.heads();
  const std::size_t dim = p.attention.dim();
  const std::size_t steps = tr.frames.rows;
  Matrix dframes(steps, dim);
  std::vector<double> dw(steps);
  std::vector<double> da(steps);
  for (std::size_t h = 0; h < heads; ++h) {
    const double* ge = dpooled.data() + h * dim;
    const double* mu = p.attention.mu.row(h);
    const double s = p.attention.s[h];
    // e_h = sum_t w x_t: dL/dx_t += w ge, dL/dw_t = ge . x_t.
    double mean_dw = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const double* x = tr.frames.row(t);
      double* dx = dframes.row(t);
      const double w = tr.weights(h, t);
      double acc = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        acc += ge[k] * x[k];
        dx[k] += w * ge[k];
      }
      dw[t] = acc;
      mean_dw += w * acc;
    }
    // Softmax over a_t = -s * d_t.
    double ds = 0.0;
    double* gmu = g.attention.mu.row(h);
    for (std::size_t t = 0; t < steps; ++t) {
      da[t] = tr.weights(h, t) * (dw[t] - mean_dw);
      const double d = tr.dist(h, t);
      ds -= da[t] * d;
      if (d == 0.0) continue;  // subgradient of the norm at zero taken as 0
      const double coef = -s * da[t] / d;
      const double* x = tr.frames.row(t);
      double* dx = dframes.row(t);
      for (std::size_t k = 0; k < dim; ++k) {
        const double u = coef * (x[k] - mu[k]);
        dx[k] += u;
        gmu[k] -= u;
      }
    }
    g.attention.s[h] += ds;
  }

  Matrix dhidden = back_rows(p.encoder_out, g.encoder_out, tr.hidden, dframes);
  for (std::size_t i = 0; i < dhidden.data.size(); ++i) {
    if (tr.hidden_pre.data[i] <= 0.0) dhidden.data[i] = 0.0;
  }
  back_rows(p.encoder_hidden, g.encoder_hidden, tr.input, dhidden);
}

}  // namespace

Matrix attention_weights(const Matrix& frames, const AttentionParams& params) {
  return attention_with_distances(frames, params, nullptr);
}

Matrix attention_pool(const Matrix& frames, const Matrix& weights) {
  if (weights.cols != frames.rows) {
    throw Error(ErrorCode::kShapeMismatch, "attention weights and frames disagree on T");
  }
  Matrix out(weights.rows, frames.cols);
  for (std::size_t h = 0; h < weights.rows; ++h) {
    double* e = out.row(h);
    for (std::size_t t = 0; t < frames.rows; ++t) {
      const double w = weights(h, t);
      const double* x = frames.row(t);
      for (std::size_t k = 0; k < frames.cols; ++k) e[k] += w * x[k];
    }
  }
  return out;
}

Matrix encode_frames(const Matrix& input, const ModelParams& p) {
  Matrix hidden;
  affine_rows(input, p.encoder_hidden, hidden);
  for (double& v : hidden.data) v = std::max(v, 0.0);
  Matrix frames;
  affine_rows(hidden, p.encoder_out, frames);
  return frames;
}

std::vector<double> forward(const FeatureMatrix& feats, const ModelParams& params) {
  Trace tr;
  run_forward(feats, params, tr);
  return tr.logits;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

LossAndGrad loss_and_grad(std::span<const Example> batch, const LabelSet& labels,
                          const ModelParams& params) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "loss over an empty batch");
  if (labels.size() != params.out_fc.out()) {
    throw Error(ErrorCode::kShapeMismatch, "label set size differs from classifier width");
  }
  LossAndGrad out;
  out.grads = params.zeros_like();
  const double scale = 1.0 / static_cast<double>(batch.size());
  Trace tr;
  for (const auto& ex : batch) {
    const std::size_t target = labels.index_of(ex.label.name);
    run_forward(ex.feats, params, tr);
    std::vector<double> prob = softmax(tr.logits);
    out.loss -= std::log(std::max(prob[target], std::numeric_limits<double>::min())) * scale;
    for (double& v : prob) v *= scale;
    prob[target] -= scale;
    run_backward(tr, params, prob, out.grads);
  }
  return out;
}

Adam::Adam(const ModelParams& like, AdamConfig config)
    : config_(config), m_(like.zeros_like()), v_(like.zeros_like()) {}

void Adam::step(ModelParams& params, const ModelParams& grads) {
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  auto p = tensors(params);
  auto m = tensors(m_);
  auto v = tensors(v_);
  auto g = tensors(const_cast<ModelParams&>(grads));
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p[k].values.size(); ++i) {
      const double gi = g[k].values[i];
      double& mi = m[k].values[i];
      double& vi = v[k].values[i];
      mi = config_.beta1 * mi + (1.0 - config_.beta1) * gi;
      vi = config_.beta2 * vi + (1.0 - config_.beta2) * gi * gi;
      p[k].values[i] -=
          config_.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + config_.epsilon);
    }
  }
  for (double& s : params.attention.s) s = std::max(s, kMinSharpness);
}

std::size_t predict(const FeatureMatrix& feats, const ModelParams& params) {
  const auto logits = forward(feats, params);
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) -
                                  logits.begin());
}

std::string StageShape::size_string() const {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i > 0) s += "x";
    s += std::to_string(dims[i]);
  }
  return s;
}

std::vector<StageShape> validate_table1_shapes(std::size_t frames, std::size_t num_classes) {
  if (frames == 0) throw Error(ErrorCode::kInvalidArgument, "frame count must be positive");
  if (num_classes == 0) throw Error(ErrorCode::kInvalidArgument, "class count must be positive");
  auto half = [](std::size_t n) { return (n + 1) / 2; };
  const char* frame_level = "Frame-level Representation Learning";
  std::size_t t = frames;
  std::size_t f = 23;
  std::vector<StageShape> stages;
  stages.push_back({frame_level, "7x7, 16", {t, f}});
  stages.push_back({frame_level, "[3x3, 16; 3x3, 16] x 3", {t, f}});
  t = half(t), f = half(f);
  stages.push_back({frame_level, "[3x3, 32; 3x3, 32] x 4, stride 2", {t, f}});
  t = half(t), f = half(f);
  stages.push_back({frame_level, "[3x3, 64; 3x3, 64] x 6, stride 2", {t, f}});
  t = half(t), f = half(f);
  stages.push_back({frame_level, "[3x3, 128; 3x3, 128] x 3, stride 2", {t, f}});
  stages.push_back({frame_level, "average pool 1x3", {t}});
  stages.push_back({"Pooling", "32 heads attention", {32, 128}});
  stages.push_back({"Utterance-level Classifier", "FC", {400}});
  stages.push_back({"Utterance-level Classifier", "FC", {num_classes}});
  return stages;
}

}  // namespace ser
