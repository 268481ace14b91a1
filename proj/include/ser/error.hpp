#pragma once

#include <stdexcept>
#include <string>

namespace ser {

enum class ErrorCode {
  kMissingFile,
  kNotWave,
  kUnsupportedChannelCount,
  kUnsupportedBitDepth,
  kUnsupportedCompression,
  kUnwritablePath,
  kInvalidArgument,
  kSampleRateMismatch,
  kSilentSignal,
  kSilentNoise,
  kShapeMismatch,
  kLabelPairing,
  kMissingFeatures,
  kEmptyInput,
  kNumerical,
  kParse,
};

const char* to_string(ErrorCode code);

// Every library failure is reported through this type; `code()` lets callers
// tell failure classes apart without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ser
