#include "ser/copypaste.hpp"

#include <algorithm>
#include <cmath>

#include "ser/error.hpp"

namespace ser {

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kNone: return "none";
    case Scheme::kNeutralCP: return "n-cp";
    case Scheme::kSameEmotionCP: return "se-cp";
    case Scheme::kNeutralPlusSameEmotionCP: return "n+se-cp";
  }
  return "?";
}

Scheme parse_scheme(const std::string& s) {
  if (s == "none") return Scheme::kNone;
  if (s == "n-cp") return Scheme::kNeutralCP;
  if (s == "se-cp") return Scheme::kSameEmotionCP;
  if (s == "n+se-cp") return Scheme::kNeutralPlusSameEmotionCP;
  throw Error(ErrorCode::kParse, "unknown scheme '" + s + "' (none, n-cp, se-cp, n+se-cp)");
}

FeatureMatrix random_crop(const FeatureMatrix& feats, double crop_seconds, Rng& rng) {
  if (!(crop_seconds > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "crop length must be positive");
  }
  // Small epsilon: 4.0 / 0.010 is 399.999... in binary floating point.
  const auto crop = static_cast<std::size_t>(std::floor(crop_seconds / feats.frame_shift_s + 1e-9));
  if (feats.rows <= crop || crop == 0) return feats;

  const std::size_t offset = uniform_index(rng, feats.rows - crop + 1);
  FeatureMatrix out(crop, feats.cols);
  out.frame_shift_s = feats.frame_shift_s;
  out.frame_length_s = feats.frame_length_s;
  const auto first = feats.values.begin() + static_cast<std::ptrdiff_t>(offset * feats.cols);
  std::copy(first, first + static_cast<std::ptrdiff_t>(crop * feats.cols), out.values.begin());
  return out;
}

FeatureMatrix concat_features(const FeatureMatrix& a, const FeatureMatrix& b, bool order_swap) {
  if (a.cols != b.cols) {
    throw Error(ErrorCode::kShapeMismatch, "cannot concatenate features of width " +
                                               std::to_string(a.cols) + " and " +
                                               std::to_string(b.cols));
  }
  if (a.rows == 0 || b.rows == 0) {
    throw Error(ErrorCode::kEmptyInput, "cannot concatenate an empty feature matrix");
  }
  const FeatureMatrix& first = order_swap ? b : a;
  const FeatureMatrix& second = order_swap ? a : b;
  FeatureMatrix out;
  out.rows = a.rows + b.rows;
  out.cols = a.cols;
  out.frame_shift_s = a.frame_shift_s;
  out.frame_length_s = a.frame_length_s;
  out.values.reserve(out.rows * out.cols);
  out.values.insert(out.values.end(), first.values.begin(), first.values.end());
  out.values.insert(out.values.end(), second.values.begin(), second.values.end());
  return out;
}

EmotionLabel concat_label(const EmotionLabel& a, const EmotionLabel& b, Scheme scheme) {
  switch (scheme) {
    case Scheme::kNeutralCP:
      if (!a.is_neutral && !b.is_neutral) {
        throw Error(ErrorCode::kLabelPairing,
                    "N-CP pair has two non-neutral labels: " + a.name + ", " + b.name);
      }
      return a.is_neutral ? b : a;
    case Scheme::kSameEmotionCP:
      if (a != b) {
        throw Error(ErrorCode::kLabelPairing,
                    "SE-CP pair has mismatched labels: " + a.name + ", " + b.name);
      }
      return a;
    default:
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("concat_label needs n-cp or se-cp, got ") + to_string(scheme));
  }
}

}  // namespace ser
