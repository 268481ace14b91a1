#include "ser/train.hpp"

#include <cmath>

#include "ser/error.hpp"

namespace ser {

namespace {

const FeatureMatrix& lookup(const FeatureStore& store, const std::string& id) {
  auto it = store.find(id);
  if (it == store.end()) {
    throw Error(ErrorCode::kMissingFeatures, "no features for utterance '" + id + "'");
  }
  return it->second;
}

}  // namespace

std::vector<std::string> predict_labels(const std::vector<Utterance>& utts,
                                        const FeatureStore& features, const LabelSet& labels,
                                        const ModelParams& params) {
  std::vector<std::string> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back(labels[predict(lookup(features, u.id), params)].name);
  return out;
}

EvalReport evaluate(const std::vector<Utterance>& utts, const FeatureStore& features,
                    const LabelSet& labels, const ModelParams& params) {
  std::vector<std::string> refs;
  for (const auto& u : utts) refs.push_back(u.label.name);
  std::vector<std::string> names;
  for (const auto& l : labels.labels()) names.push_back(l.name);
  return weighted_f1(refs, predict_labels(utts, features, labels, params), names);
}

TrainResult train(const std::vector<Utterance>& train_set, const std::vector<Utterance>& dev_set,
                  const FeatureStore& features, const LabelSet& labels, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (train_set.empty() || dev_set.empty()) {
    throw Error(ErrorCode::kEmptyInput, "training needs non-empty train and dev sets");
  }
  if (!(config.adam.learning_rate > 0.0) || config.batch_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate and batch size must be positive");
  }
  for (const auto* set : {&train_set, &dev_set}) {
    for (const auto& u : *set) {
      labels.index_of(u.label.name);
      lookup(features, u.id);
    }
  }

  ModelConfig mc = config.model;
  mc.num_classes = labels.size();
  if (!features.empty()) mc.input_dim = lookup(features, train_set.front().id).cols;

  TrainResult result;
  ModelParams params = init_params(mc, derive_seed(config.seed, "init"));
  result.best_params = params;
  Adam adam(params, config.adam);
  double best = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochPlan plan = plan_epoch(train_set, config.batch_size, config.scheme, config.aug_fraction,
                                derive_seed(config.seed, epoch));
    for (auto& w : plan.warnings) result.warnings.push_back("epoch " + std::to_string(epoch) + ": " + w);

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const std::vector<Example> batch =
          materialize_batch(plan.batches[b], features, config.crop_seconds);
      LossAndGrad lg = loss_and_grad(batch, labels, params);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorCode::kNumerical, "non-finite loss at epoch " + std::to_string(epoch) +
                                               ", batch " + std::to_string(b) +
                                               "; try a smaller learning rate");
      }
      loss_sum += lg.loss;
      adam.step(params, lg.grads);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(plan.batches.size());
    log.dev_weighted_f1 = evaluate(dev_set, features, labels, params).weighted_f1;
    result.history.push_back(log.dev_weighted_f1);
    result.log.push_back(log);
    if (log.dev_weighted_f1 > best) {
      best = log.dev_weighted_f1;
      result.best_params = params;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(log);
  }
  return result;
}

FeatureStore build_feature_store(const std::vector<Utterance>& utts, const MfccConfig& mfcc,
                                 const VadConfig& vad) {
  MfccExtractor extractor(mfcc);
  FeatureStore store;
  for (const auto& u : utts) store.emplace(u.id, extract_features(extractor, load_audio(u), vad));
  return store;
}

}  // namespace ser
