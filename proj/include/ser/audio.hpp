#pragma once

#include <filesystem>
#include <vector>

#include "ser/rng.hpp"

namespace ser {

struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// Throws unless the waveform is non-empty, finite and has a positive rate.
void validate(const Waveform& wave);

Waveform read_wav(const std::filesystem::path& path);
void write_wav(const Waveform& wave, const std::filesystem::path& path);

double mean_power(const Waveform& wave);

// Everything mix_at_snr computes on the way to its output. `scaled_noise` is
// the noise actually added (gain applied, before any peak rescale), so the
// achieved SNR can be re-measured from it.
struct MixResult {
  Waveform mixture;
  Waveform scaled_noise;
  double gain = 1.0;
  std::size_t noise_offset = 0;
  double rescale = 1.0;  // factor applied to the whole mixture (1 if none)
};

inline constexpr double kMixPeakTarget = 0.99;

MixResult mix_at_snr_detailed(const Waveform& signal, const Waveform& noise,
                              double snr_db, Rng& rng);
Waveform mix_at_snr(const Waveform& signal, const Waveform& noise,
                    double snr_db, Rng& rng);

double snr_db(const Waveform& signal, const Waveform& noise);

}  // namespace ser
