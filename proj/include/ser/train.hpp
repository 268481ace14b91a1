#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ser/batcher.hpp"
#include "ser/eval.hpp"
#include "ser/model.hpp"

namespace ser {

struct TrainConfig {
  std::size_t batch_size = kDefaultBatchSize;
  Scheme scheme = Scheme::kNone;
  double aug_fraction = kDefaultAugFraction;
  double crop_seconds = kDefaultCropSeconds;
  AdamConfig adam;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  ModelConfig model;  // num_classes is taken from the label set
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean over batches
  double dev_weighted_f1 = 0.0;
};

struct TrainResult {
  ModelParams best_params;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  std::vector<double> history;  // dev weighted F1 per epoch
  std::vector<EpochLog> log;
  std::vector<std::string> warnings;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Adam on mean cross-entropy, one epoch plan per epoch (seeded from
// config.seed and the epoch number); keeps the parameters of the epoch with
// the best dev weighted F1, earliest epoch on ties.
TrainResult train(const std::vector<Utterance>& train_set, const std::vector<Utterance>& dev_set,
                  const FeatureStore& features, const LabelSet& labels, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

std::vector<std::string> predict_labels(const std::vector<Utterance>& utts,
                                        const FeatureStore& features, const LabelSet& labels,
                                        const ModelParams& params);

EvalReport evaluate(const std::vector<Utterance>& utts, const FeatureStore& features,
                    const LabelSet& labels, const ModelParams& params);

// MFCC + VAD + mean normalization for every utterance.
FeatureStore build_feature_store(const std::vector<Utterance>& utts,
                                 const MfccConfig& mfcc = {}, const VadConfig& vad = {});

}  // namespace ser
