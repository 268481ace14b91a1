#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ser/audio.hpp"
#include "ser/corpus.hpp"

namespace ser {

inline constexpr std::array<double, 3> kTrainSnrsDb = {10.0, 5.0, 0.0};

struct NoisyCopy {
  Utterance utt;     // id already suffixed, audio set to the mixture
  std::string tag;   // "noise" or "music"
  double target_snr_db = 0.0;
  double measured_snr_db = 0.0;  // signal vs scaled noise, before peak rescale
  std::size_t noise_index = 0;
  std::size_t noise_offset = 0;
};

// Receives each copy as it is produced and returns the utterance to keep
// (e.g. with audio replaced by a file path after writing it out). The default
// keeps the mixture inline.
using CopySink = std::function<Utterance(NoisyCopy&&)>;

std::string noisy_id(const std::string& id, const std::string& tag, double snr_db);

// Originals followed by one copy per (tag, SNR) in {noise, music} x {10, 5, 0} dB.
std::vector<Utterance> build_augmented_trainset(const std::vector<Utterance>& train,
                                                const NoiseCorpus& corpus, std::uint64_t seed,
                                                const CopySink& sink = {});

// One copy per utterance at `snr_db`; tag drawn uniformly per utterance.
std::vector<Utterance> make_noisy_testset(const std::vector<Utterance>& test,
                                          const NoiseCorpus& corpus, double snr_db,
                                          std::uint64_t seed, const CopySink& sink = {});

}  // namespace ser
