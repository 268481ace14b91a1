#include "ser/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "ser/error.hpp"

namespace ser {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "missing file";
    case ErrorCode::kNotWave: return "not a RIFF/WAVE file";
    case ErrorCode::kUnsupportedChannelCount: return "unsupported channel count";
    case ErrorCode::kUnsupportedBitDepth: return "unsupported bit depth";
    case ErrorCode::kUnsupportedCompression: return "unsupported compression";
    case ErrorCode::kUnwritablePath: return "unwritable path";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kSampleRateMismatch: return "sample rate mismatch";
    case ErrorCode::kSilentSignal: return "silent signal";
    case ErrorCode::kSilentNoise: return "silent noise";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kLabelPairing: return "label pairing";
    case ErrorCode::kMissingFeatures: return "missing features";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kNumerical: return "numerical failure";
    case ErrorCode::kParse: return "parse error";
  }
  return "unknown";
}

void validate(const Waveform& wave) {
  if (wave.samples.empty()) {
    throw Error(ErrorCode::kEmptyInput, "waveform has no samples");
  }
  if (wave.sample_rate_hz <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "waveform sample rate must be positive");
  }
  for (double s : wave.samples) {
    if (!std::isfinite(s)) {
      throw Error(ErrorCode::kNumerical, "waveform contains a non-finite sample");
    }
  }
}

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

std::int16_t quantize(double x) {
  x = std::clamp(x, -1.0, 1.0) * 32768.0;
  double r = std::round(x);  // half away from zero
  return static_cast<std::int16_t>(std::clamp(r, -32768.0, 32767.0));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kMissingFile, "cannot open " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::kNotWave, path.string() + ": missing RIFF/WAVE header");
  }

  bool have_fmt = false;
  int sample_rate = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;

  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const unsigned char* chunk = data + pos;
    std::size_t size = le32(chunk + 4);
    std::size_t body = pos + 8;
    if (body + size > n) size = n - body;  // tolerate truncated trailing chunk
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw Error(ErrorCode::kNotWave, path.string() + ": short fmt chunk");
      std::uint16_t format = le16(data + body);
      std::uint16_t channels = le16(data + body + 2);
      sample_rate = static_cast<int>(le32(data + body + 4));
      std::uint16_t bits = le16(data + body + 14);
      if (format != 1) {
        throw Error(ErrorCode::kUnsupportedCompression,
                    path.string() + ": unsupported compression (format " +
                        std::to_string(format) + ")");
      }
      if (channels != 1) {
        throw Error(ErrorCode::kUnsupportedChannelCount,
                    path.string() + ": unsupported channel count " + std::to_string(channels));
      }
      if (bits != 16) {
        throw Error(ErrorCode::kUnsupportedBitDepth,
                    path.string() + ": unsupported bit depth " + std::to_string(bits));
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      pcm = data + body;
      pcm_bytes = size;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || pcm == nullptr) {
    throw Error(ErrorCode::kNotWave, path.string() + ": missing fmt or data chunk");
  }

  Waveform wave;
  wave.sample_rate_hz = sample_rate;
  wave.samples.resize(pcm_bytes / 2);
  for (std::size_t i = 0; i < wave.samples.size(); ++i) {
    auto v = static_cast<std::int16_t>(le16(pcm + 2 * i));
    wave.samples[i] = v / 32768.0;
  }
  if (wave.samples.empty()) {
    throw Error(ErrorCode::kEmptyInput, path.string() + ": no samples");
  }
  return wave;
}

void write_wav(const Waveform& wave, const std::filesystem::path& path) {
  validate(wave);
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(wave.sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(wave.sample_rate_hz) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (double s : wave.samples) put16(out, static_cast<std::uint16_t>(quantize(s)));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size()))) {
    throw Error(ErrorCode::kUnwritablePath, "cannot write " + path.string());
  }
}

double mean_power(const Waveform& wave) {
  if (wave.samples.empty()) throw Error(ErrorCode::kEmptyInput, "mean_power of empty waveform");
  double acc = 0.0;
  for (double s : wave.samples) acc += s * s;
  return acc / static_cast<double>(wave.samples.size());
}

double snr_db(const Waveform& signal, const Waveform& noise) {
  return 10.0 * std::log10(mean_power(signal) / mean_power(noise));
}

MixResult mix_at_snr_detailed(const Waveform& signal, const Waveform& noise, double snr,
                              Rng& rng) {
  validate(signal);
  validate(noise);
  if (!std::isfinite(snr)) {
    throw Error(ErrorCode::kInvalidArgument, "target SNR must be finite");
  }
  if (signal.sample_rate_hz != noise.sample_rate_hz) {
    throw Error(ErrorCode::kSampleRateMismatch, "signal and noise sample rates differ");
  }
  const double p_signal = mean_power(signal);
  if (!(p_signal > 0.0)) throw Error(ErrorCode::kSilentSignal, "signal is silent; SNR undefined");

  MixResult r;
  const std::size_t n = signal.size();
  const std::size_t m = noise.size();
  r.noise_offset = uniform_index(rng, m);
  r.scaled_noise.sample_rate_hz = signal.sample_rate_hz;
  r.scaled_noise.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.scaled_noise.samples[i] = noise.samples[(r.noise_offset + i) % m];
  }
  // Power of the segment actually used, so the target holds for this mixture.
  const double p_noise = mean_power(r.scaled_noise);
  if (!(p_noise > 0.0)) throw Error(ErrorCode::kSilentNoise, "noise is silent");

  r.gain = std::sqrt(p_signal / p_noise * std::pow(10.0, -snr / 10.0));
  for (double& s : r.scaled_noise.samples) s *= r.gain;

  r.mixture.sample_rate_hz = signal.sample_rate_hz;
  r.mixture.samples.resize(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.mixture.samples[i] = signal.samples[i] + r.scaled_noise.samples[i];
    peak = std::max(peak, std::abs(r.mixture.samples[i]));
  }
  if (peak > 1.0) {
    r.rescale = kMixPeakTarget / peak;
    for (double& s : r.mixture.samples) s *= r.rescale;
  }
  return r;
}

Waveform mix_at_snr(const Waveform& signal, const Waveform& noise, double snr, Rng& rng) {
  return mix_at_snr_detailed(signal, noise, snr, rng).mixture;
}

}  // namespace ser
