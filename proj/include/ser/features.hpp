#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "ser/audio.hpp"

namespace ser {

// Row-major T x D matrix of per-frame cepstra.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  double frame_shift_s = 0.010;
  double frame_length_s = 0.025;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t t, std::size_t d) : rows(t), cols(d), values(t * d, 0.0) {}

  double& operator()(std::size_t t, std::size_t d) { return values[t * cols + d]; }
  double operator()(std::size_t t, std::size_t d) const { return values[t * cols + d]; }
  std::span<const double> row(std::size_t t) const { return {values.data() + t * cols, cols}; }
  std::span<double> row(std::size_t t) { return {values.data() + t * cols, cols}; }

  bool operator==(const FeatureMatrix&) const = default;
};

struct VadMask {
  std::vector<bool> keep;
  // Set when the threshold rejected every frame and all were kept instead.
  bool fallback = false;

  std::size_t kept() const;
};

struct MfccConfig {
  int sample_rate_hz = 16000;
  int frame_length = 400;  // samples (25 ms)
  int frame_shift = 160;   // samples (10 ms)
  int fft_size = 512;
  int num_mel_bins = 23;
  int num_ceps = 23;
  double low_freq_hz = 20.0;
  double high_freq_hz = 7600.0;
  double preemphasis = 0.97;
  double energy_floor = 1e-10;
};

struct VadConfig {
  // 5.5 on the int16 scale, shifted into the natural-log energy scale of
  // [-1,1] amplitudes.
  double threshold = 5.5 + 2.0 * std::log(1.0 / 32768.0);
  double mean_scale = 0.5;
  double energy_floor = 1e-10;
};

std::size_t num_frames(std::size_t num_samples, const MfccConfig& config = {});

// Holds the FFT plan and mel filterbank so repeated extraction does no setup.
// Not safe to share between threads; create one per worker.
class MfccExtractor {
 public:
  explicit MfccExtractor(MfccConfig config = {});
  ~MfccExtractor();
  MfccExtractor(const MfccExtractor&) = delete;
  MfccExtractor& operator=(const MfccExtractor&) = delete;

  FeatureMatrix compute(const Waveform& wave) const;
  const MfccConfig& config() const { return config_; }

  // Triangular mel weights, num_mel_bins x (fft_size/2 + 1), row-major.
  const std::vector<double>& mel_weights() const { return mel_weights_; }

 private:
  struct Fft;
  MfccConfig config_;
  std::vector<double> window_;
  std::vector<double> mel_weights_;
  std::vector<double> dct_;
  std::unique_ptr<Fft> fft_;
};

FeatureMatrix compute_mfcc(const Waveform& wave, const MfccConfig& config = {});

double mel_scale(double hz);
std::vector<double> hamming_window(int length);
std::vector<double> mel_filterbank(const MfccConfig& config);

VadMask energy_vad(const FeatureMatrix& feats, const VadConfig& config = {});
FeatureMatrix mean_normalize(const FeatureMatrix& feats, const VadMask& mask);

// MFCC, energy VAD and mean normalization in one call: the model input.
FeatureMatrix extract_features(const MfccExtractor& extractor, const Waveform& wave,
                               const VadConfig& vad = {}, bool* vad_fallback = nullptr);

// Cache file: little-endian uint32 T, uint32 D, then T*D float32 row-major.
void write_feature_cache(const FeatureMatrix& feats, const std::filesystem::path& path);
FeatureMatrix read_feature_cache(const std::filesystem::path& path);

}  // namespace ser
