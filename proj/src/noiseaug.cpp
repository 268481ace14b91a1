#include "ser/noiseaug.hpp"

#include <cmath>
#include <sstream>

#include "ser/error.hpp"
#include "ser/rng.hpp"

namespace ser {

std::string noisy_id(const std::string& id, const std::string& tag, double snr_db) {
  std::ostringstream os;
  os << id << '#' << tag << snr_db;
  return os.str();
}

namespace {

const std::vector<Waveform>& files_for(const NoiseCorpus& corpus, const std::string& tag) {
  const auto& files = tag == kNoiseTag ? corpus.noise : corpus.music;
  if (files.empty()) {
    throw Error(ErrorCode::kEmptyInput, "noise corpus has no '" + tag + "' files");
  }
  return files;
}

Utterance make_copy(const Utterance& src, const Waveform& signal, const NoiseCorpus& corpus,
                    const std::string& tag, double snr_db, Rng& rng, const CopySink& sink) {
  const auto& files = files_for(corpus, tag);
  NoisyCopy copy;
  copy.tag = tag;
  copy.target_snr_db = snr_db;
  copy.noise_index = uniform_index(rng, files.size());
  MixResult mix = mix_at_snr_detailed(signal, files[copy.noise_index], snr_db, rng);
  copy.noise_offset = mix.noise_offset;
  copy.measured_snr_db = ser::snr_db(signal, mix.scaled_noise);
  copy.utt = src;
  copy.utt.id = noisy_id(src.id, tag, snr_db);
  copy.utt.audio = std::move(mix.mixture);
  if (sink) return sink(std::move(copy));
  return std::move(copy.utt);
}

}  // namespace

std::vector<Utterance> build_augmented_trainset(const std::vector<Utterance>& train,
                                                const NoiseCorpus& corpus, std::uint64_t seed,
                                                const CopySink& sink) {
  files_for(corpus, kNoiseTag);
  files_for(corpus, kMusicTag);

  std::vector<Utterance> out(train.begin(), train.end());
  out.reserve(train.size() * (1 + 2 * kTrainSnrsDb.size()));
  // Copies are grouped by (tag, snr); audio is loaded once per source.
  std::vector<std::vector<Utterance>> groups(2 * kTrainSnrsDb.size());
  for (const auto& utt : train) {
    const Waveform signal = load_audio(utt);
    std::size_t g = 0;
    for (const char* tag : {kNoiseTag, kMusicTag}) {
      for (double snr : kTrainSnrsDb) {
        Rng rng(derive_seed(seed, noisy_id(utt.id, tag, snr)));
        groups[g++].push_back(make_copy(utt, signal, corpus, tag, snr, rng, sink));
      }
    }
  }
  for (auto& group : groups) {
    for (auto& u : group) out.push_back(std::move(u));
  }
  return out;
}

std::vector<Utterance> make_noisy_testset(const std::vector<Utterance>& test,
                                          const NoiseCorpus& corpus, double snr_db,
                                          std::uint64_t seed, const CopySink& sink) {
  if (!std::isfinite(snr_db)) throw Error(ErrorCode::kInvalidArgument, "SNR must be finite");
  if (corpus.noise.empty() && corpus.music.empty()) {
    throw Error(ErrorCode::kEmptyInput, "noise corpus is empty");
  }
  std::vector<Utterance> out;
  out.reserve(test.size());
  for (const auto& utt : test) {
    Rng rng(derive_seed(seed, utt.id + "@" + std::to_string(snr_db)));
    std::string tag = uniform_index(rng, 2) == 0 ? kNoiseTag : kMusicTag;
    // A one-sided corpus still works for test sets.
    if (tag == kNoiseTag && corpus.noise.empty()) tag = kMusicTag;
    if (tag == kMusicTag && corpus.music.empty()) tag = kNoiseTag;
    out.push_back(make_copy(utt, load_audio(utt), corpus, tag, snr_db, rng, sink));
  }
  return out;
}

}  // namespace ser
