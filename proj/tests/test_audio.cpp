#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>

#include "ser/audio.hpp"
#include "ser/error.hpp"
#include "test_util.hpp"

using namespace ser;
using ser::testing::TempDir;

namespace {

// Minimal RIFF writer for formats write_wav refuses to produce.
void write_raw_wav(const std::filesystem::path& path, std::uint16_t format, std::uint16_t channels,
                   std::uint16_t bits, const std::vector<std::int16_t>& samples) {
  auto u32 = [](std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto u16 = [](std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xFF));
    s.push_back(static_cast<char>(v >> 8));
  };
  std::string data;
  for (auto v : samples) u16(data, static_cast<std::uint16_t>(v));
  std::string out = "RIFF";
  u32(out, static_cast<std::uint32_t>(36 + data.size()));
  out += "WAVEfmt ";
  u32(out, 16);
  u16(out, format);
  u16(out, channels);
  u32(out, 16000);
  u32(out, 16000u * channels * bits / 8);
  u16(out, static_cast<std::uint16_t>(channels * bits / 8));
  u16(out, bits);
  out += "data";
  u32(out, static_cast<std::uint32_t>(data.size()));
  out += data;
  std::ofstream(path, std::ios::binary) << out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected ser::Error";
  return ErrorCode::kParse;
}

}  // namespace

TEST(ReadWav, ScalesByInt16Range) {
  TempDir dir("audio");
  write_raw_wav(dir / "a.wav", 1, 1, 16, {0, 16384, -32768});
  Waveform w = read_wav(dir / "a.wav");
  ASSERT_EQ(w.samples.size(), 3u);
  EXPECT_EQ(w.samples[0], 0.0);
  EXPECT_EQ(w.samples[1], 0.5);
  EXPECT_EQ(w.samples[2], -1.0);
  EXPECT_EQ(w.sample_rate_hz, 16000);
}

TEST(ReadWav, DistinctErrors) {
  TempDir dir("audio");
  write_raw_wav(dir / "stereo.wav", 1, 2, 16, {1, 2, 3, 4});
  write_raw_wav(dir / "8bit.wav", 1, 1, 8, {1, 2});
  write_raw_wav(dir / "float.wav", 3, 1, 32, {1, 2});
  std::ofstream(dir / "junk.wav") << "not a wave file at all";

  EXPECT_EQ(code_of([&] { read_wav(dir / "missing.wav"); }), ErrorCode::kMissingFile);
  EXPECT_EQ(code_of([&] { read_wav(dir / "stereo.wav"); }), ErrorCode::kUnsupportedChannelCount);
  EXPECT_EQ(code_of([&] { read_wav(dir / "8bit.wav"); }), ErrorCode::kUnsupportedBitDepth);
  EXPECT_EQ(code_of([&] { read_wav(dir / "float.wav"); }), ErrorCode::kUnsupportedCompression);
  EXPECT_EQ(code_of([&] { read_wav(dir / "junk.wav"); }), ErrorCode::kNotWave);
  try {
    read_wav(dir / "stereo.wav");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported channel count"), std::string::npos);
  }
}

TEST(WriteWav, QuantizationEdges) {
  TempDir dir("audio");
  Waveform w{{1.0, 0.0, -1.0, 2.0, 0.5 / 32768.0, -0.5 / 32768.0}, 16000};
  write_wav(w, dir / "q.wav");
  Waveform r = read_wav(dir / "q.wav");
  EXPECT_EQ(r.samples[0] * 32768.0, 32767.0);  // clamped max
  EXPECT_EQ(r.samples[1], 0.0);
  EXPECT_EQ(r.samples[2], -1.0);
  EXPECT_EQ(r.samples[3] * 32768.0, 32767.0);
  EXPECT_EQ(r.samples[4] * 32768.0, 1.0);   // half rounds away from zero
  EXPECT_EQ(r.samples[5] * 32768.0, -1.0);
}

TEST(WriteWav, DataChunkSize) {
  TempDir dir("audio");
  write_wav(ser::testing::sine(440.0, 1.0, 0.5), dir / "s.wav");
  EXPECT_EQ(std::filesystem::file_size(dir / "s.wav"), 44u + 32000u);
}

TEST(WriteWav, UnwritablePath) {
  EXPECT_EQ(code_of([] { write_wav(Waveform{{0.0}, 16000}, "/nonexistent_dir/x/y.wav"); }),
            ErrorCode::kUnwritablePath);
}

TEST(WriteWav, RoundTripWithinOneStep) {
  TempDir dir("audio");
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Waveform w = ser::testing::white_noise(1 + rng() % 5000, 0.4, rng());
    write_wav(w, dir / "rt.wav");
    Waveform r = read_wav(dir / "rt.wav");
    ASSERT_EQ(r.samples.size(), w.samples.size());
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      ASSERT_LE(std::abs(r.samples[i] - w.samples[i]), 1.0 / 32768.0);
    }
  }
}

TEST(MeanPower, Basics) {
  EXPECT_DOUBLE_EQ(mean_power(Waveform{std::vector<double>(100, 0.5), 16000}), 0.25);
  EXPECT_NEAR(mean_power(ser::testing::sine(100.0, 1.0)), 0.5, 1e-6);
  EXPECT_THROW(mean_power(Waveform{{}, 16000}), Error);
}

TEST(MeanPower, MatchesDirectSum) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Waveform w;
  for (int i = 0; i < 100; ++i) w.samples.push_back(u(rng));
  long double acc = 0.0L;
  for (double s : w.samples) acc += static_cast<long double>(s) * s;
  EXPECT_NEAR(mean_power(w), static_cast<double>(acc / 100.0L), 1e-12);
}

TEST(MeanPower, ScalesQuadratically) {
  std::mt19937 rng(5);
  for (double a : {0.1, 0.5, 1.7, 3.0}) {
    Waveform w = ser::testing::white_noise(777, 0.2, rng());
    Waveform scaled = w;
    for (double& s : scaled.samples) s *= a;
    const double expected = a * a * mean_power(w);
    EXPECT_NEAR(mean_power(scaled), expected, 1e-9 * expected);
  }
}

TEST(MixAtSnr, GainForEqualPowers) {
  Waveform s{std::vector<double>(1000, 0.3), 16000};
  Waveform n{std::vector<double>(1000, -0.3), 16000};
  Rng rng(1);
  EXPECT_NEAR(mix_at_snr_detailed(s, n, 0.0, rng).gain, 1.0, 1e-12);
  EXPECT_NEAR(mix_at_snr_detailed(s, n, 10.0, rng).gain, std::pow(10.0, -0.5), 1e-12);
  EXPECT_NEAR(std::pow(10.0, -0.5), 0.31623, 1e-5);
}

TEST(MixAtSnr, MeasuredSnrMatchesTarget) {
  std::mt19937 seeds(21);
  for (int trial = 0; trial < 50; ++trial) {
    Waveform s = ser::testing::sine(150.0 + trial * 7.0, 0.5 + 0.05 * trial, 0.3);
    Waveform n = ser::testing::white_noise(3000 + trial * 311, 0.1, seeds());
    const double target = -5.0 + trial % 21;
    Rng rng(seeds());
    MixResult r = mix_at_snr_detailed(s, n, target, rng);
    EXPECT_NEAR(snr_db(s, r.scaled_noise), target, 0.01);
    double peak = 0.0;
    for (double v : r.mixture.samples) peak = std::max(peak, std::abs(v));
    EXPECT_LE(peak, 1.0);
    EXPECT_EQ(r.mixture.size(), s.size());
  }
}

TEST(MixAtSnr, RescalesLoudMixture) {
  Waveform s = ser::testing::sine(200.0, 0.5, 0.95);
  Waveform n = ser::testing::white_noise(4000, 0.5, 9);
  Rng rng(2);
  MixResult r = mix_at_snr_detailed(s, n, 0.0, rng);
  double peak = 0.0;
  for (double v : r.mixture.samples) peak = std::max(peak, std::abs(v));
  EXPECT_LT(r.rescale, 1.0);
  EXPECT_NEAR(peak, kMixPeakTarget, 1e-12);
}

TEST(MixAtSnr, Errors) {
  Rng rng(1);
  Waveform s = ser::testing::sine(200.0, 0.1, 0.5);
  Waveform silent{std::vector<double>(100, 0.0), 16000};
  Waveform other_rate = ser::testing::sine(200.0, 0.1, 0.5, 8000);
  EXPECT_EQ(code_of([&] { mix_at_snr(s, silent, 0.0, rng); }), ErrorCode::kSilentNoise);
  EXPECT_EQ(code_of([&] { mix_at_snr(silent, s, 0.0, rng); }), ErrorCode::kSilentSignal);
  EXPECT_EQ(code_of([&] { mix_at_snr(s, other_rate, 0.0, rng); }), ErrorCode::kSampleRateMismatch);
}

TEST(MixAtSnr, DeterministicGivenSeed) {
  Waveform s = ser::testing::sine(300.0, 0.3, 0.4);
  Waveform n = ser::testing::white_noise(20000, 0.2, 4);
  Rng a(99), b(99);
  EXPECT_EQ(mix_at_snr(s, n, 5.0, a).samples, mix_at_snr(s, n, 5.0, b).samples);
}
