#include "ser/synthcorpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "ser/error.hpp"
#include "ser/rng.hpp"

namespace ser {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kUnwritablePath, "cannot create directory " + dir.string());
  }
}

void check(const SynthConfig& c) {
  if (c.n_classes < 2 || c.n_speakers < 1 || c.utts_per_speaker_per_class < 1) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic corpus needs >= 2 classes and >= 1 speaker");
  }
  if (!(c.min_duration_s > 0.0) || c.max_duration_s < c.min_duration_s) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic durations must be positive and ordered");
  }
  if (!(c.min_emotion_span > 0.0) || c.max_emotion_span > 1.0 ||
      c.max_emotion_span < c.min_emotion_span) {
    throw Error(ErrorCode::kInvalidArgument, "emotion span fractions must lie in (0, 1]");
  }
}

double speaker_pitch_hz(const SynthConfig& c, const std::string& speaker) {
  Rng rng(derive_seed(c.seed, "pitch/" + speaker));
  return uniform_real(rng, 115.0, 145.0);
}

}  // namespace

std::vector<std::string> synth_class_names(std::size_t n_classes) {
  if (n_classes < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic corpus needs >= 2 classes");
  static const char* kNames[] = {"neutral", "angry", "happy", "sad", "disgust", "fear", "surprise"};
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n_classes; ++k) {
    names.push_back(k < std::size(kNames) ? kNames[k] : "emotion" + std::to_string(k));
  }
  return names;
}

ClassSignature class_signature(std::size_t k) {
  switch (k) {
    case 0: return {1.00, 3.0, 0.6, 1.0};
    case 1: return {1.35, 6.5, 0.8, 0.45};
    case 2: return {1.30, 5.0, 0.7, 1.30};
    case 3: return {0.80, 1.8, 0.3, 1.70};
    default: {
      // Spread further classes deterministically around the neutral point.
      const double phase = static_cast<double>(k) * 2.399963;  // golden angle
      return {1.0 + 0.3 * std::sin(phase), 3.0 + 2.5 * std::cos(phase), 0.6,
              1.0 + 0.5 * std::sin(2.0 * phase)};
    }
  }
}

std::vector<SynthUtterancePlan> plan_synth_corpus(const SynthConfig& c) {
  check(c);
  std::vector<std::string> speakers;
  for (std::size_t s = 0; s < c.n_speakers; ++s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "spk%02zu", s);
    speakers.emplace_back(buf);
  }
  // Speaker-disjoint 60/20/20 split.
  std::vector<std::size_t> order(c.n_speakers);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(c.seed, "splits"));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_train = static_cast<std::size_t>(std::lround(0.6 * static_cast<double>(c.n_speakers)));
  const auto n_dev = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(c.n_speakers)));
  std::vector<Split> speaker_split(c.n_speakers, Split::kTest);
  for (std::size_t i = 0; i < c.n_speakers; ++i) {
    if (i < n_train) {
      speaker_split[order[i]] = Split::kTrain;
    } else if (i < n_train + n_dev) {
      speaker_split[order[i]] = Split::kDev;
    }
  }

  const auto names = synth_class_names(c.n_classes);
  std::vector<SynthUtterancePlan> plans;
  for (std::size_t s = 0; s < c.n_speakers; ++s) {
    for (std::size_t k = 0; k < c.n_classes; ++k) {
      for (std::size_t i = 0; i < c.utts_per_speaker_per_class; ++i) {
        SynthUtterancePlan p;
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s_%s_%02zu", speakers[s].c_str(), names[k].c_str(), i);
        p.id = buf;
        p.speaker_id = speakers[s];
        p.class_index = k;
        p.split = speaker_split[s];
        p.seed = derive_seed(c.seed, p.id);
        Rng rng(p.seed);
        p.duration_s = uniform_real(rng, c.min_duration_s, c.max_duration_s);
        if (k != 0) {
          p.span_fraction = uniform_real(rng, c.min_emotion_span, c.max_emotion_span);
          p.span_start = uniform_real(rng, 0.0, 1.0 - p.span_fraction);
        }
        plans.push_back(std::move(p));
      }
    }
  }
  return plans;
}

Waveform render_utterance(const SynthConfig& c, const SynthUtterancePlan& plan,
                          double span_override) {
  Rng rng(derive_seed(plan.seed, "render"));
  auto jitter = [&](double v) {
    return v * (1.0 + uniform_real(rng, -c.signature_jitter, c.signature_jitter));
  };
  const double base_pitch = speaker_pitch_hz(c, plan.speaker_id);
  ClassSignature neutral = class_signature(0);
  ClassSignature emotion = class_signature(plan.class_index);
  for (ClassSignature* sig : {&neutral, &emotion}) {
    sig->pitch_ratio = jitter(sig->pitch_ratio);
    sig->am_rate_hz = jitter(sig->am_rate_hz);
    sig->tilt = jitter(sig->tilt);
  }

  double span_start = plan.span_start;
  double span_fraction = plan.span_fraction;
  if (span_override >= 0.0 && plan.class_index != 0) {
    span_fraction = std::min(span_override, 1.0);
    span_start = (1.0 - span_fraction) * (plan.span_fraction > 0.0 && plan.span_fraction < 1.0
                                              ? plan.span_start / (1.0 - plan.span_fraction)
                                              : 0.0);
  }

  const auto n = static_cast<std::size_t>(plan.duration_s * c.sample_rate_hz);
  const auto span_begin = static_cast<std::size_t>(span_start * static_cast<double>(n));
  const auto span_end = static_cast<std::size_t>((span_start + span_fraction) * static_cast<double>(n));
  // Short low-level lead-in and tail give the VAD something to drop.
  const auto pad = static_cast<std::size_t>(0.15 * c.sample_rate_hz);

  const double sr = c.sample_rate_hz;
  const double loudness = uniform_real(rng, 0.2, 0.5);
  const double am_phase = uniform_real(rng, 0.0, kTwoPi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Harmonic amplitudes n^-tilt, fixed per signature for the utterance.
  auto harmonic_weights = [&](const ClassSignature& sig) {
    const auto count = static_cast<int>(std::min(20.0, 7000.0 / (base_pitch * sig.pitch_ratio)));
    std::vector<double> w;
    for (int h = 1; h <= count; ++h) w.push_back(std::pow(h, -sig.tilt));
    return w;
  };
  const std::vector<double> neutral_weights = harmonic_weights(neutral);
  const std::vector<double> emotion_weights = harmonic_weights(emotion);

  Waveform wave;
  wave.sample_rate_hz = c.sample_rate_hz;
  wave.samples.assign(n, 0.0);
  double phase = uniform_real(rng, 0.0, kTwoPi);
  double am_clock = am_phase;
  double voiced_power = 0.0;
  std::size_t voiced = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool in_span = plan.class_index != 0 && i >= span_begin && i < span_end;
    const ClassSignature& sig = in_span ? emotion : neutral;
    const std::vector<double>& weights = in_span ? emotion_weights : neutral_weights;
    const double f0 = base_pitch * sig.pitch_ratio;
    phase = std::fmod(phase + kTwoPi * f0 / sr, kTwoPi);
    am_clock = std::fmod(am_clock + kTwoPi * sig.am_rate_hz / sr, kTwoPi);
    // sin(h phase) by the Chebyshev recurrence.
    const double two_cos = 2.0 * std::cos(phase);
    double prev = 0.0, cur = std::sin(phase), v = 0.0;
    for (double w : weights) {
      v += w * cur;
      const double next = two_cos * cur - prev;
      prev = cur;
      cur = next;
    }
    const double envelope = 1.0 - sig.am_depth * 0.5 * (1.0 + std::cos(am_clock));
    double s = loudness * envelope * v / 3.0;
    if (i < pad || i + pad >= n) s = 0.0;
    if (s != 0.0) {
      voiced_power += s * s;
      ++voiced;
    }
    wave.samples[i] = s;
  }
  const double noise_rms =
      std::sqrt((voiced ? voiced_power / static_cast<double>(voiced) : 1e-4) *
                std::pow(10.0, -c.background_snr_db / 10.0));
  double peak = 0.0;
  for (double& s : wave.samples) {
    s += noise_rms * gauss(rng);
    peak = std::max(peak, std::abs(s));
  }
  if (peak > 0.95) {
    for (double& s : wave.samples) s *= 0.95 / peak;
  }
  return wave;
}

SynthCorpus generate_corpus(const SynthConfig& c, const std::filesystem::path& out_dir) {
  const auto plans = plan_synth_corpus(c);
  const auto wav_dir = out_dir / "wav";
  ensure_dir(wav_dir);
  const auto names = synth_class_names(c.n_classes);

  SynthCorpus corpus;
  corpus.manifest = out_dir / "manifest.tsv";
  for (const auto& p : plans) {
    const auto path = wav_dir / (p.id + ".wav");
    write_wav(render_utterance(c, p), path);
    Utterance u;
    u.id = p.id;
    u.speaker_id = p.speaker_id;
    u.label = {names[p.class_index], p.class_index == 0};
    u.split = p.split;
    u.audio = path;
    corpus.utterances.push_back(std::move(u));
  }
  write_manifest(corpus.utterances, corpus.manifest);
  return corpus;
}

namespace {

Waveform render_noise(const SynthConfig& c, std::size_t index) {
  Rng rng(derive_seed(c.seed, "noise/" + std::to_string(index)));
  const auto n = static_cast<std::size_t>(c.noise_duration_s * c.sample_rate_hz);
  // Band-limited noise: white noise through a one-pole high-pass and a
  // one-pole low-pass with per-file cutoffs.
  const double lo = uniform_real(rng, 50.0, 800.0);
  const double hi = uniform_real(rng, 1500.0, 7000.0);
  const double sr = c.sample_rate_hz;
  const double a_hi = std::exp(-kTwoPi * lo / sr);
  const double a_lo = std::exp(-kTwoPi * hi / sr);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Waveform w;
  w.sample_rate_hz = c.sample_rate_hz;
  w.samples.resize(n);
  double prev_in = 0.0, hp = 0.0, lp = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = gauss(rng);
    hp = a_hi * (hp + x - prev_in);
    prev_in = x;
    lp = (1.0 - a_lo) * hp + a_lo * lp;
    w.samples[i] = lp;
    peak = std::max(peak, std::abs(lp));
  }
  for (double& s : w.samples) s *= 0.5 / peak;
  return w;
}

Waveform render_music(const SynthConfig& c, std::size_t index) {
  Rng rng(derive_seed(c.seed, "music/" + std::to_string(index)));
  const auto n = static_cast<std::size_t>(c.noise_duration_s * c.sample_rate_hz);
  const double sr = c.sample_rate_hz;
  // Arpeggiated triads over a random root; each note a decaying harmonic tone.
  const double root = 110.0 * std::pow(2.0, uniform_real(rng, 0.0, 2.0));
  const double note_s = uniform_real(rng, 0.12, 0.3);
  const int intervals[][3] = {{0, 4, 7}, {0, 3, 7}, {5, 9, 12}, {7, 11, 14}};
  Waveform w;
  w.sample_rate_hz = c.sample_rate_hz;
  w.samples.assign(n, 0.0);
  const auto note_len = static_cast<std::size_t>(note_s * sr);
  std::size_t note = 0;
  double peak = 0.0;
  for (std::size_t start = 0; start < n; start += note_len, ++note) {
    const auto& chord = intervals[(note / 8) % 4];
    const double f = root * std::pow(2.0, chord[note % 3] / 12.0) * (note % 6 < 3 ? 1.0 : 2.0);
    for (std::size_t i = start; i < std::min(n, start + note_len); ++i) {
      const double t = static_cast<double>(i - start) / sr;
      double v = 0.0;
      for (int h = 1; h <= 4; ++h) v += std::sin(kTwoPi * f * h * t) / h;
      w.samples[i] = v * std::exp(-3.0 * t / note_s);
      peak = std::max(peak, std::abs(w.samples[i]));
    }
  }
  for (double& s : w.samples) s *= 0.5 / peak;
  return w;
}

}  // namespace

NoiseCorpus synth_noise_corpus(const SynthConfig& c) {
  NoiseCorpus corpus;
  for (std::size_t i = 0; i < c.noise_files; ++i) corpus.noise.push_back(render_noise(c, i));
  for (std::size_t i = 0; i < c.music_files; ++i) corpus.music.push_back(render_music(c, i));
  return corpus;
}

std::filesystem::path generate_noise_proxy(const SynthConfig& c,
                                           const std::filesystem::path& out_dir) {
  const auto dir = out_dir / "noise";
  ensure_dir(dir);
  const NoiseCorpus corpus = synth_noise_corpus(c);
  std::vector<std::pair<std::string, std::filesystem::path>> rows;
  for (std::size_t i = 0; i < corpus.noise.size(); ++i) {
    auto path = dir / ("noise_" + std::to_string(i) + ".wav");
    write_wav(corpus.noise[i], path);
    rows.emplace_back(kNoiseTag, path);
  }
  for (std::size_t i = 0; i < corpus.music.size(); ++i) {
    auto path = dir / ("music_" + std::to_string(i) + ".wav");
    write_wav(corpus.music[i], path);
    rows.emplace_back(kMusicTag, path);
  }
  const auto manifest = dir / "manifest.txt";
  write_noise_manifest(rows, manifest);
  return manifest;
}

}  // namespace ser
