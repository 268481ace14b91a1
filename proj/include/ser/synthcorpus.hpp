#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ser/audio.hpp"
#include "ser/corpus.hpp"

namespace ser {

struct SynthConfig {
  std::size_t n_classes = 4;  // class 0 is neutral
  std::size_t n_speakers = 20;
  std::size_t utts_per_speaker_per_class = 5;
  double min_duration_s = 2.0;
  double max_duration_s = 6.0;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 7;

  // Fraction of an emotional utterance that carries its class signature.
  double min_emotion_span = 0.3;
  double max_emotion_span = 0.6;
  // Relative per-utterance jitter of every signature parameter.
  double signature_jitter = 0.15;
  // Level of the additive background noise relative to the voiced signal.
  double background_snr_db = 20.0;

  std::size_t noise_files = 10;
  std::size_t music_files = 10;
  double noise_duration_s = 10.0;
};

// Acoustic signature of one class: harmonic tone parameters.
struct ClassSignature {
  double pitch_ratio = 1.0;    // multiplies the speaker's base pitch
  double am_rate_hz = 3.0;     // amplitude modulation rate
  double am_depth = 0.6;
  double tilt = 1.0;           // harmonic n has amplitude n^-tilt
};

std::vector<std::string> synth_class_names(std::size_t n_classes);
ClassSignature class_signature(std::size_t class_index);

struct SynthUtterancePlan {
  std::string id;
  std::string speaker_id;
  std::size_t class_index = 0;
  Split split = Split::kTrain;
  double duration_s = 0.0;
  double span_start = 0.0;     // fraction of the duration
  double span_fraction = 0.0;  // 0 for neutral
  std::uint64_t seed = 0;
};

// Everything about the corpus except the samples; deterministic in config.seed.
std::vector<SynthUtterancePlan> plan_synth_corpus(const SynthConfig& config);

// `span_override` < 0 keeps the planned emotion span; otherwise forces the
// class signature to cover that fraction of the utterance (1 = whole).
Waveform render_utterance(const SynthConfig& config, const SynthUtterancePlan& plan,
                          double span_override = -1.0);

struct SynthCorpus {
  std::vector<Utterance> utterances;
  std::filesystem::path manifest;
};

// Writes `<out>/wav/<id>.wav` and `<out>/manifest.tsv`.
SynthCorpus generate_corpus(const SynthConfig& config, const std::filesystem::path& out_dir);

// Writes `<out>/noise/*.wav` and `<out>/noise/manifest.txt`; returns the manifest path.
std::filesystem::path generate_noise_proxy(const SynthConfig& config,
                                           const std::filesystem::path& out_dir);
NoiseCorpus synth_noise_corpus(const SynthConfig& config);

}  // namespace ser
