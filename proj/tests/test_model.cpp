#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ser/error.hpp"
#include "ser/model.hpp"
#include "test_util.hpp"

using namespace ser;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.data) v = g(rng);
  return m;
}

AttentionParams random_attention(std::size_t heads, std::size_t dim, std::mt19937_64& rng) {
  AttentionParams p;
  p.mu = random_matrix(heads, dim, rng);
  std::uniform_real_distribution<double> s(0.2, 3.0);
  for (std::size_t h = 0; h < heads; ++h) p.s.push_back(s(rng));
  return p;
}

FeatureMatrix random_features(std::size_t t, std::size_t d, std::mt19937_64& rng) {
  FeatureMatrix f(t, d);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& v : f.values) v = g(rng);
  return f;
}

LabelSet labels3() { return LabelSet({"angry", "neutral", "sad"}, "neutral"); }

ModelConfig tiny_config() {
  ModelConfig c;
  c.input_dim = 4;
  c.hidden_dim = 5;
  c.encoder_dim = 3;
  c.heads = 2;
  c.embedding_dim = 4;
  c.num_classes = 3;
  return c;
}

// Initialization leaves biases at zero and s at one; perturb everything so
// the check exercises generic parameter values.
ModelParams random_model(std::mt19937_64& rng) {
  ModelParams p = init_params(tiny_config(), rng());
  std::normal_distribution<double> g(0.0, 0.3);
  std::uniform_real_distribution<double> s(0.5, 2.0);
  for (auto& t : tensors(p)) {
    for (double& v : t.values) v += g(rng);
  }
  for (double& v : p.attention.s) v = s(rng);
  return p;
}

std::vector<Example> random_batch(std::mt19937_64& rng, std::size_t n) {
  const auto labels = labels3();
  std::vector<Example> batch;
  for (std::size_t i = 0; i < n; ++i) {
    batch.push_back({random_features(1 + rng() % 6, 4, rng), labels[rng() % 3]});
  }
  return batch;
}

}  // namespace

TEST(AttentionWeights, IdenticalFramesAreUniform) {
  std::mt19937_64 rng(1);
  Matrix x(9, 4);
  for (std::size_t t = 0; t < 9; ++t) {
    for (std::size_t k = 0; k < 4; ++k) x(t, k) = 0.25 * static_cast<double>(k);
  }
  Matrix w = attention_weights(x, random_attention(3, 4, rng));
  for (double v : w.data) EXPECT_NEAR(v, 1.0 / 9.0, 1e-15);
}

TEST(AttentionWeights, ZeroSharpnessIsUniform) {
  std::mt19937_64 rng(2);
  AttentionParams p = random_attention(2, 3, rng);
  p.s = {0.0, 0.0};
  Matrix w = attention_weights(random_matrix(5, 3, rng), p);
  for (double v : w.data) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(AttentionWeights, MatchesExtendedPrecision) {
  std::mt19937_64 rng(3);
  Matrix x = random_matrix(7, 3, rng);
  AttentionParams p = random_attention(2, 3, rng);
  Matrix w = attention_weights(x, p);
  for (std::size_t h = 0; h < 2; ++h) {
    std::vector<long double> e(7);
    long double total = 0.0L;
    for (std::size_t t = 0; t < 7; ++t) {
      long double d2 = 0.0L;
      for (std::size_t k = 0; k < 3; ++k) {
        const long double diff = static_cast<long double>(x(t, k)) - p.mu(h, k);
        d2 += diff * diff;
      }
      e[t] = std::exp(-static_cast<long double>(p.s[h]) * std::sqrt(d2));
      total += e[t];
    }
    for (std::size_t t = 0; t < 7; ++t) {
      const double ref = static_cast<double>(e[t] / total);
      EXPECT_NEAR(w(h, t), ref, 1e-12 * ref);
    }
  }
}

TEST(AttentionWeights, RowsSumToOne) {
  std::mt19937_64 rng(4);
  for (std::size_t t : {1u, 2u, 10u, 1000u}) {
    for (int trial = 0; trial < 5; ++trial) {
      AttentionParams p = random_attention(4, 6, rng);
      for (double& s : p.s) s *= 10.0;  // sharp heads stress the normalization
      Matrix w = attention_weights(random_matrix(t, 6, rng, 3.0), p);
      for (std::size_t h = 0; h < 4; ++h) {
        double sum = 0.0;
        for (std::size_t i = 0; i < t; ++i) sum += w(h, i);
        EXPECT_NEAR(sum, 1.0, 1e-9);
      }
    }
  }
}

TEST(AttentionWeights, ExtremeDistancesStayFinite) {
  std::mt19937_64 rng(5);
  AttentionParams p = random_attention(2, 3, rng);
  p.s = {1e4, 1e4};
  Matrix x = random_matrix(20, 3, rng, 100.0);
  for (double v : attention_weights(x, p).data) EXPECT_TRUE(std::isfinite(v));
}

TEST(AttentionWeights, TranslationCovariant) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x = random_matrix(12, 5, rng);
    AttentionParams p = random_attention(3, 5, rng);
    Matrix shift = random_matrix(1, 5, rng, 4.0);
    Matrix xs = x;
    AttentionParams ps = p;
    for (std::size_t t = 0; t < 12; ++t) {
      for (std::size_t k = 0; k < 5; ++k) xs(t, k) += shift(0, k);
    }
    for (std::size_t h = 0; h < 3; ++h) {
      for (std::size_t k = 0; k < 5; ++k) ps.mu(h, k) += shift(0, k);
    }
    Matrix a = attention_weights(x, p), b = attention_weights(xs, ps);
    for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-9);
  }
}

TEST(AttentionPool, UniformAndOneHot) {
  std::mt19937_64 rng(7);
  Matrix x = random_matrix(5, 3, rng);
  Matrix uniform(2, 5);
  std::fill(uniform.data.begin(), uniform.data.end(), 0.2);
  Matrix e = attention_pool(x, uniform);
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (std::size_t t = 0; t < 5; ++t) mean += x(t, k);
    EXPECT_NEAR(e(0, k), mean / 5.0, 1e-15);
  }
  Matrix onehot(1, 5);
  onehot(0, 3) = 1.0;
  Matrix sel = attention_pool(x, onehot);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(sel(0, k), x(3, k));
  EXPECT_THROW(attention_pool(x, Matrix(1, 4)), Error);
}

TEST(AttentionPool, MatchesLoopOracle) {
  std::mt19937_64 rng(8);
  Matrix x = random_matrix(30, 6, rng);
  Matrix w = attention_weights(x, random_attention(4, 6, rng));
  Matrix e = attention_pool(x, w);
  for (std::size_t h = 0; h < 4; ++h) {
    for (std::size_t k = 0; k < 6; ++k) {
      long double acc = 0.0L;
      for (std::size_t t = 0; t < 30; ++t) acc += static_cast<long double>(w(h, t)) * x(t, k);
      EXPECT_NEAR(e(h, k), static_cast<double>(acc), 1e-12);
    }
  }
}

TEST(Forward, ZeroClassifierGivesUniformSoftmax) {
  std::mt19937_64 rng(9);
  ModelParams p = random_model(rng);
  for (auto& t : tensors(p)) {
    if (t.name.rfind("out_fc", 0) == 0) std::fill(t.values.begin(), t.values.end(), 0.0);
  }
  auto logits = forward(random_features(7, 4, rng), p);
  for (double l : logits) EXPECT_EQ(l, 0.0);
  for (double q : softmax(logits)) EXPECT_NEAR(q, 1.0 / 3.0, 1e-15);
}

TEST(Forward, ConstantFramesAreOrderInvariant) {
  std::mt19937_64 rng(10);
  ModelParams p = random_model(rng);
  FeatureMatrix f(6, 4);
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t k = 0; k < 4; ++k) f(t, k) = 0.3 * static_cast<double>(k) - 0.2;
  }
  FeatureMatrix reversed = f;
  std::reverse(reversed.values.begin(), reversed.values.end());
  // Reversing the whole buffer reverses rows and columns; restore columns.
  for (std::size_t t = 0; t < 6; ++t) std::reverse(reversed.row(t).begin(), reversed.row(t).end());
  EXPECT_EQ(forward(f, p), forward(reversed, p));
}

TEST(Forward, MatchesHandSteppedChain) {
  std::mt19937_64 rng(11);
  ModelParams p = random_model(rng);
  FeatureMatrix f = random_features(4, 4, rng);
  const ModelConfig c = tiny_config();

  std::vector<std::vector<double>> x(4, std::vector<double>(c.encoder_dim));
  for (std::size_t t = 0; t < 4; ++t) {
    std::vector<double> h(c.hidden_dim);
    for (std::size_t j = 0; j < c.hidden_dim; ++j) {
      double a = p.encoder_hidden.bias[j];
      for (std::size_t i = 0; i < c.input_dim; ++i) a += p.encoder_hidden.weight(j, i) * f(t, i);
      h[j] = a > 0.0 ? a : 0.0;
    }
    for (std::size_t d = 0; d < c.encoder_dim; ++d) {
      double a = p.encoder_out.bias[d];
      for (std::size_t j = 0; j < c.hidden_dim; ++j) a += p.encoder_out.weight(d, j) * h[j];
      x[t][d] = a;
    }
  }
  std::vector<double> pooled;
  for (std::size_t hd = 0; hd < c.heads; ++hd) {
    std::vector<double> score(4);
    double total = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < c.encoder_dim; ++d) {
        d2 += (x[t][d] - p.attention.mu(hd, d)) * (x[t][d] - p.attention.mu(hd, d));
      }
      score[t] = std::exp(-p.attention.s[hd] * std::sqrt(d2));
      total += score[t];
    }
    for (std::size_t d = 0; d < c.encoder_dim; ++d) {
      double e = 0.0;
      for (std::size_t t = 0; t < 4; ++t) e += score[t] / total * x[t][d];
      pooled.push_back(e);
    }
  }
  std::vector<double> emb(c.embedding_dim);
  for (std::size_t j = 0; j < c.embedding_dim; ++j) {
    double a = p.head_fc.bias[j];
    for (std::size_t i = 0; i < pooled.size(); ++i) a += p.head_fc.weight(j, i) * pooled[i];
    emb[j] = std::max(a, 0.0);
  }
  auto logits = forward(f, p);
  for (std::size_t k = 0; k < c.num_classes; ++k) {
    double a = p.out_fc.bias[k];
    for (std::size_t j = 0; j < c.embedding_dim; ++j) a += p.out_fc.weight(k, j) * emb[j];
    EXPECT_NEAR(logits[k], a, 1e-9);
  }
}

TEST(Forward, ShapeMismatch) {
  std::mt19937_64 rng(12);
  EXPECT_THROW(forward(random_features(3, 5, rng), random_model(rng)), Error);
}

TEST(LossAndGrad, UniformLogitsGiveLogC) {
  std::mt19937_64 rng(13);
  ModelParams p = random_model(rng);
  for (auto& t : tensors(p)) {
    if (t.name.rfind("out_fc", 0) == 0) std::fill(t.values.begin(), t.values.end(), 0.0);
  }
  EXPECT_NEAR(loss_and_grad(random_batch(rng, 5), labels3(), p).loss, std::log(3.0), 1e-12);
}

TEST(LossAndGrad, MatchesCentralDifferences) {
  std::mt19937_64 rng(14);
  const double step = 1e-5;
  for (int model = 0; model < 20; ++model) {
    ModelParams p = random_model(rng);
    auto batch = random_batch(rng, 3);
    LossAndGrad analytic = loss_and_grad(batch, labels3(), p);
    auto grads = tensors(analytic.grads);
    auto views = tensors(p);
    for (std::size_t g = 0; g < views.size(); ++g) {
      double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
      for (std::size_t i = 0; i < views[g].values.size(); ++i) {
        const double saved = views[g].values[i];
        views[g].values[i] = saved + step;
        const double up = loss_and_grad(batch, labels3(), p).loss;
        views[g].values[i] = saved - step;
        const double down = loss_and_grad(batch, labels3(), p).loss;
        views[g].values[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double a = grads[g].values[i];
        diff2 += (a - numeric) * (a - numeric);
        a2 += a * a;
        n2 += numeric * numeric;
      }
      const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-8});
      EXPECT_LT(std::sqrt(diff2) / denom, 1e-5) << "model " << model << " " << views[g].name;
    }
  }
}

TEST(LossAndGrad, DuplicatedBatchHasSameLossAndGrads) {
  std::mt19937_64 rng(15);
  ModelParams p = random_model(rng);
  auto batch = random_batch(rng, 4);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  LossAndGrad a = loss_and_grad(batch, labels3(), p);
  LossAndGrad b = loss_and_grad(doubled, labels3(), p);
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
  auto ga = tensors(a.grads);
  auto gb = tensors(b.grads);
  for (std::size_t g = 0; g < ga.size(); ++g) {
    for (std::size_t i = 0; i < ga[g].values.size(); ++i) {
      EXPECT_NEAR(ga[g].values[i], gb[g].values[i], 1e-12);
    }
  }
}

TEST(LossAndGrad, CoincidentFrameAndCenter) {
  std::mt19937_64 rng(16);
  ModelParams p = random_model(rng);
  auto batch = random_batch(rng, 1);
  // Put head 0's center exactly on the first encoded frame.
  Matrix x = encode_frames(Matrix::from_features(batch[0].feats), p);
  for (std::size_t k = 0; k < x.cols; ++k) p.attention.mu(0, k) = x(0, k);
  const LossAndGrad lg = loss_and_grad(batch, labels3(), p);
  for (const auto& [name, values] : tensors(lg.grads)) {
    for (double v : values) EXPECT_TRUE(std::isfinite(v)) << name;
  }
}

TEST(Adam, DescendsOnFixedBatch) {
  std::mt19937_64 rng(17);
  ModelParams p = random_model(rng);
  auto batch = random_batch(rng, 6);
  Adam adam(p, AdamConfig{1e-3});
  const double initial = loss_and_grad(batch, labels3(), p).loss;
  for (int step = 0; step < 50; ++step) {
    LossAndGrad lg = loss_and_grad(batch, labels3(), p);
    adam.step(p, lg.grads);
  }
  EXPECT_LT(loss_and_grad(batch, labels3(), p).loss, initial);
  EXPECT_EQ(adam.steps(), 50u);
}

TEST(Adam, KeepsSharpnessPositive) {
  std::mt19937_64 rng(18);
  ModelParams p = random_model(rng);
  p.attention.s = {1e-7, 1e-7};
  ModelParams g = p.zeros_like();
  g.attention.s = {1.0, 1.0};
  Adam adam(p, AdamConfig{1.0});
  adam.step(p, g);
  for (double s : p.attention.s) EXPECT_GE(s, kMinSharpness);
}

TEST(InitParams, ShapesAndDefaults) {
  ModelParams p = init_params(ModelConfig{}, 1);
  EXPECT_NO_THROW(validate(p));
  const ModelConfig c = p.config();
  EXPECT_EQ(c.input_dim, 23u);
  EXPECT_EQ(c.hidden_dim, 64u);
  EXPECT_EQ(c.encoder_dim, 32u);
  EXPECT_EQ(c.heads, 32u);
  EXPECT_EQ(p.head_fc.in(), 32u * 32u);
  for (double s : p.attention.s) EXPECT_EQ(s, 1.0);
  EXPECT_EQ(init_params(ModelConfig{}, 1), p);
  EXPECT_FALSE(init_params(ModelConfig{}, 2) == p);
}

TEST(Checkpoint, RoundTripAndErrors) {
  ser::testing::TempDir dir("ckpt");
  std::mt19937_64 rng(19);
  ModelParams p = random_model(rng);
  save_checkpoint(p, labels3(), dir / "m.bin");
  Checkpoint ck = load_checkpoint(dir / "m.bin");
  EXPECT_EQ(ck.params, p);
  EXPECT_EQ(ck.labels, labels3());
  EXPECT_EQ(ck.labels.neutral_index(), 1u);

  try {
    load_checkpoint(dir / "missing.bin");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingFile);
  }
  const auto size = std::filesystem::file_size(dir / "m.bin");
  std::filesystem::resize_file(dir / "m.bin", size - 3);
  EXPECT_THROW(load_checkpoint(dir / "m.bin"), Error);
  EXPECT_THROW(save_checkpoint(p, LabelSet({"neutral", "x"}, "neutral"), dir / "n.bin"), Error);
}

TEST(ReferenceShapes, OneSixtyFrames) {
  auto stages = validate_table1_shapes(160, 4);
  std::vector<std::string> sizes;
  for (const auto& s : stages) sizes.push_back(s.size_string());
  EXPECT_EQ(sizes, (std::vector<std::string>{"160x23", "160x23", "80x12", "40x6", "20x3", "20",
                                             "32x128", "400", "4"}));
}

TEST(ReferenceShapes, FrequencyAxisAndTimeLinearity) {
  auto small = validate_table1_shapes(8, 5);
  EXPECT_EQ(small[2].dims[1], 12u);
  EXPECT_EQ(small[3].dims[1], 6u);
  EXPECT_EQ(small[4].dims[1], 3u);
  EXPECT_EQ(small[5].dims[0], 1u);
  auto a = validate_table1_shapes(64, 5), b = validate_table1_shapes(128, 5);
  for (std::size_t i = 0; i <= 5; ++i) EXPECT_EQ(b[i].dims[0], 2 * a[i].dims[0]);
  EXPECT_THROW(validate_table1_shapes(0, 4), Error);
}
