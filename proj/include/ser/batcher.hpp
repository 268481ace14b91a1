#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "ser/copypaste.hpp"
#include "ser/corpus.hpp"
#include "ser/features.hpp"
#include "ser/rng.hpp"

namespace ser {

struct BatchItem {
  enum class Kind { kSingle, kConcat };

  Kind kind = Kind::kSingle;
  std::string id_a;
  std::string id_b;                // Concat only
  Scheme scheme = Scheme::kNone;   // n-cp or se-cp for Concat
  bool order_swap = false;
  std::uint64_t crop_seed = 0;
  EmotionLabel assigned_label;

  static BatchItem single(const Utterance& u);
  bool is_concat() const { return kind == Kind::kConcat; }
  bool operator==(const BatchItem&) const = default;
};

struct BatchSpec {
  // How the batch was scheduled: kNone for a clean batch, otherwise the
  // per-batch CopyPaste variant. A scheduled batch can still hold only
  // Single items when its labels admit no pairing.
  Scheme scheme = Scheme::kNone;
  std::vector<BatchItem> items;

  bool operator==(const BatchSpec&) const = default;
};

struct EpochPlan {
  std::vector<BatchSpec> batches;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::kNone;
  double aug_fraction = 0.8;
  std::vector<std::string> warnings;  // not serialized

  std::size_t count_batches(Scheme batch_scheme) const;
};

inline constexpr std::size_t kDefaultBatchSize = 128;
inline constexpr double kDefaultAugFraction = 0.8;

// Number of N-CP and SE-CP batches scheduled for `n_batches` batches.
struct AugQuota {
  std::size_t ncp = 0;
  std::size_t secp = 0;
};
AugQuota augmentation_quota(std::size_t n_batches, Scheme scheme, double aug_fraction);

EpochPlan plan_epoch(const std::vector<Utterance>& corpus, std::size_t batch_size, Scheme scheme,
                     double aug_fraction, std::uint64_t seed);

// Returns true in `degenerate` when no pairing was possible and the batch was
// passed through unchanged.
std::vector<BatchItem> pair_ncp(const std::vector<Utterance>& batch, Rng& rng,
                                bool* degenerate = nullptr);
std::vector<BatchItem> pair_secp(const std::vector<Utterance>& batch, Rng& rng);

using FeatureStore = std::unordered_map<std::string, FeatureMatrix>;

struct Example {
  FeatureMatrix feats;
  EmotionLabel label;
};

// Concat items crop both members with an Rng seeded from their own crop_seed,
// so any batch can be materialized independently and replayed exactly.
std::vector<Example> materialize_batch(const BatchSpec& spec, const FeatureStore& store,
                                       double crop_seconds);

// Line format: a `#` header with seed/scheme/fraction, then one batch per line:
// `B:<scheme>` followed by items `S:<id>` or `C:<idA>:<idB>:<scheme>:<swap>:<seed>`.
void write_epoch_plan(const EpochPlan& plan, std::ostream& out);
// Labels are recomputed from `corpus` and checked against each scheme's rule.
EpochPlan read_epoch_plan(std::istream& in, const std::vector<Utterance>& corpus);

}  // namespace ser
