#include "ser/features.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numbers>

#include <fftw3.h>

#include "ser/error.hpp"

namespace ser {

std::size_t VadMask::kept() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
}

std::size_t num_frames(std::size_t num_samples, const MfccConfig& config) {
  const auto len = static_cast<std::size_t>(config.frame_length);
  if (num_samples < len) return 0;
  return 1 + (num_samples - len) / static_cast<std::size_t>(config.frame_shift);
}

double mel_scale(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

std::vector<double> hamming_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  const double a = 2.0 * std::numbers::pi / (length - 1);
  for (int i = 0; i < length; ++i) w[static_cast<std::size_t>(i)] = 0.54 - 0.46 * std::cos(a * i);
  return w;
}

std::vector<double> mel_filterbank(const MfccConfig& config) {
  const int num_bins = config.fft_size / 2 + 1;
  const int num_mel = config.num_mel_bins;
  const double mel_lo = mel_scale(config.low_freq_hz);
  const double mel_hi = mel_scale(config.high_freq_hz);
  const double delta = (mel_hi - mel_lo) / (num_mel + 1);
  const double hz_per_bin = static_cast<double>(config.sample_rate_hz) / config.fft_size;

  std::vector<double> weights(static_cast<std::size_t>(num_mel * num_bins), 0.0);
  for (int m = 0; m < num_mel; ++m) {
    const double left = mel_lo + m * delta;
    const double center = left + delta;
    const double right = center + delta;
    for (int k = 0; k < num_bins; ++k) {
      const double mel = mel_scale(k * hz_per_bin);
      double w = 0.0;
      if (mel > left && mel <= center) {
        w = (mel - left) / (center - left);
      } else if (mel > center && mel < right) {
        w = (right - mel) / (right - center);
      }
      weights[static_cast<std::size_t>(m * num_bins + k)] = w;
    }
  }
  return weights;
}

struct MfccExtractor::Fft {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;

  explicit Fft(int n) {
    in = fftw_alloc_real(static_cast<std::size_t>(n));
    out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  ~Fft() {
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

MfccExtractor::MfccExtractor(MfccConfig config) : config_(config) {
  if (config_.frame_length <= 1 || config_.frame_shift <= 0 ||
      config_.fft_size < config_.frame_length || config_.num_ceps > config_.num_mel_bins ||
      config_.num_ceps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "inconsistent MFCC configuration");
  }
  window_ = hamming_window(config_.frame_length);
  mel_weights_ = mel_filterbank(config_);

  const int n = config_.num_mel_bins;
  dct_.resize(static_cast<std::size_t>(config_.num_ceps * n));
  for (int k = 0; k < config_.num_ceps; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) {
      dct_[static_cast<std::size_t>(k * n + i)] =
          scale * std::cos(std::numbers::pi * k * (i + 0.5) / n);
    }
  }
  fft_ = std::make_unique<Fft>(config_.fft_size);
}

MfccExtractor::~MfccExtractor() = default;

FeatureMatrix MfccExtractor::compute(const Waveform& wave) const {
  validate(wave);
  if (wave.sample_rate_hz != config_.sample_rate_hz) {
    throw Error(ErrorCode::kSampleRateMismatch, "MFCC extractor expects " +
                                                    std::to_string(config_.sample_rate_hz) +
                                                    " Hz input");
  }
  const std::size_t frames = num_frames(wave.size(), config_);
  if (frames == 0) {
    throw Error(ErrorCode::kInvalidArgument, "waveform shorter than one frame");
  }

  const auto len = static_cast<std::size_t>(config_.frame_length);
  const auto fft_n = static_cast<std::size_t>(config_.fft_size);
  const std::size_t num_bins = fft_n / 2 + 1;
  const auto num_mel = static_cast<std::size_t>(config_.num_mel_bins);
  const auto num_ceps = static_cast<std::size_t>(config_.num_ceps);
  const double log_floor = std::log(config_.energy_floor);

  FeatureMatrix out(frames, num_ceps);
  out.frame_shift_s = static_cast<double>(config_.frame_shift) / config_.sample_rate_hz;
  out.frame_length_s = static_cast<double>(config_.frame_length) / config_.sample_rate_hz;

  std::vector<double> frame(len);
  std::vector<double> magnitude(num_bins);
  std::vector<double> log_mel(num_mel);

  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = wave.samples.data() + t * static_cast<std::size_t>(config_.frame_shift);
    double mean = 0.0;
    for (std::size_t i = 0; i < len; ++i) mean += src[i];
    mean /= static_cast<double>(len);
    double energy = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      frame[i] = src[i] - mean;
      energy += frame[i] * frame[i];
    }
    for (std::size_t i = len - 1; i > 0; --i) frame[i] -= config_.preemphasis * frame[i - 1];
    frame[0] -= config_.preemphasis * frame[0];

    for (std::size_t i = 0; i < len; ++i) fft_->in[i] = frame[i] * window_[i];
    std::fill(fft_->in + len, fft_->in + fft_n, 0.0);
    fftw_execute(fft_->plan);
    for (std::size_t k = 0; k < num_bins; ++k) {
      magnitude[k] = std::hypot(fft_->out[k][0], fft_->out[k][1]);
    }

    for (std::size_t m = 0; m < num_mel; ++m) {
      const double* w = mel_weights_.data() + m * num_bins;
      double acc = 0.0;
      for (std::size_t k = 0; k < num_bins; ++k) acc += w[k] * magnitude[k];
      log_mel[m] = std::log(std::max(acc, config_.energy_floor));
    }
    for (std::size_t c = 0; c < num_ceps; ++c) {
      const double* d = dct_.data() + c * num_mel;
      double acc = 0.0;
      for (std::size_t m = 0; m < num_mel; ++m) acc += d[m] * log_mel[m];
      out(t, c) = acc;
    }
    out(t, 0) = std::max(std::log(std::max(energy, config_.energy_floor)), log_floor);
  }
  return out;
}

FeatureMatrix compute_mfcc(const Waveform& wave, const MfccConfig& config) {
  return MfccExtractor(config).compute(wave);
}

VadMask energy_vad(const FeatureMatrix& feats, const VadConfig& config) {
  VadMask mask;
  mask.keep.assign(feats.rows, false);
  if (feats.rows == 0) return mask;

  double mean_log_energy = 0.0;
  for (std::size_t t = 0; t < feats.rows; ++t) mean_log_energy += feats(t, 0);
  mean_log_energy /= static_cast<double>(feats.rows);

  const double threshold = config.threshold + config.mean_scale * mean_log_energy;
  // Frames sitting on the energy floor carry no signal and are never speech.
  const double floor = std::log(config.energy_floor);
  bool any = false;
  for (std::size_t t = 0; t < feats.rows; ++t) {
    const double e = feats(t, 0);
    mask.keep[t] = e > threshold && e > floor;
    any = any || mask.keep[t];
  }
  if (!any) {
    mask.keep.assign(feats.rows, true);
    mask.fallback = true;
  }
  return mask;
}

FeatureMatrix mean_normalize(const FeatureMatrix& feats, const VadMask& mask) {
  if (mask.keep.size() != feats.rows) {
    throw Error(ErrorCode::kShapeMismatch, "VAD mask length differs from frame count");
  }
  const std::size_t kept = mask.kept();
  if (kept == 0) throw Error(ErrorCode::kEmptyInput, "mean_normalize: no frames kept");

  FeatureMatrix out(kept, feats.cols);
  out.frame_shift_s = feats.frame_shift_s;
  out.frame_length_s = feats.frame_length_s;
  std::size_t r = 0;
  for (std::size_t t = 0; t < feats.rows; ++t) {
    if (!mask.keep[t]) continue;
    std::copy_n(feats.values.begin() + static_cast<std::ptrdiff_t>(t * feats.cols), feats.cols,
                out.values.begin() + static_cast<std::ptrdiff_t>(r * feats.cols));
    ++r;
  }
  for (std::size_t c = 0; c < out.cols; ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < kept; ++t) mean += out(t, c);
    mean /= static_cast<double>(kept);
    for (std::size_t t = 0; t < kept; ++t) out(t, c) -= mean;
  }
  return out;
}

FeatureMatrix extract_features(const MfccExtractor& extractor, const Waveform& wave,
                               const VadConfig& vad, bool* vad_fallback) {
  FeatureMatrix mfcc = extractor.compute(wave);
  VadMask mask = energy_vad(mfcc, vad);
  if (vad_fallback != nullptr) *vad_fallback = mask.fallback;
  return mean_normalize(mfcc, mask);
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_feature_cache(const FeatureMatrix& feats, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kUnwritablePath, "cannot write " + path.string());
  put_u32(out, static_cast<std::uint32_t>(feats.rows));
  put_u32(out, static_cast<std::uint32_t>(feats.cols));
  for (double v : feats.values) {
    float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  if (!out) throw Error(ErrorCode::kUnwritablePath, "short write to " + path.string());
}

FeatureMatrix read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8) throw Error(ErrorCode::kParse, path.string() + ": truncated header");
  const std::size_t rows = get_u32(b);
  const std::size_t cols = get_u32(b + 4);
  if (bytes.size() != 8 + rows * cols * 4) {
    throw Error(ErrorCode::kParse, path.string() + ": size does not match header");
  }
  FeatureMatrix feats(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    std::uint32_t bits = get_u32(b + 8 + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    feats.values[i] = f;
  }
  return feats;
}

}  // namespace ser
