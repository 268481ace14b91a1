#pragma once

#include <string>

#include "ser/corpus.hpp"
#include "ser/features.hpp"
#include "ser/rng.hpp"

namespace ser {

enum class Scheme { kNone, kNeutralCP, kSameEmotionCP, kNeutralPlusSameEmotionCP };

// "none", "n-cp", "se-cp", "n+se-cp".
const char* to_string(Scheme scheme);
Scheme parse_scheme(const std::string& s);

inline constexpr double kDefaultCropSeconds = 4.0;

// A contiguous block of floor(crop_seconds / frame_shift) frames at a uniform
// random offset, or the whole matrix when it is not longer than that.
FeatureMatrix random_crop(const FeatureMatrix& feats, double crop_seconds, Rng& rng);

// Row-wise concatenation: a then b, or b then a when `order_swap` is set.
FeatureMatrix concat_features(const FeatureMatrix& a, const FeatureMatrix& b, bool order_swap);

// Label of a concatenated pair. N-CP: the non-neutral member's label (neutral
// if both are neutral). SE-CP: the shared label. Invalid pairings throw
// kLabelPairing. Only the two per-pair schemes are accepted.
EmotionLabel concat_label(const EmotionLabel& a, const EmotionLabel& b, Scheme scheme);

}  // namespace ser
