#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ser/audio.hpp"

namespace ser {

struct EmotionLabel {
  std::string name;
  bool is_neutral = false;

  bool operator==(const EmotionLabel&) const = default;
};

// Ordered label set with exactly one neutral member. Class indices used by the
// model are positions in this set.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::vector<std::string> names, const std::string& neutral_name);

  // Sorted union of names; `neutral_name` must be among them.
  static LabelSet from_names(const std::vector<std::string>& names,
                             const std::string& neutral_name = "neutral");

  std::size_t size() const { return labels_.size(); }
  const EmotionLabel& operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<EmotionLabel>& labels() const { return labels_; }
  std::size_t index_of(const std::string& name) const;
  std::optional<std::size_t> find(const std::string& name) const;
  const EmotionLabel& label(const std::string& name) const { return labels_[index_of(name)]; }
  std::size_t neutral_index() const { return neutral_; }

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<EmotionLabel> labels_;
  std::size_t neutral_ = 0;
};

enum class Split { kTrain, kDev, kTest };

const char* to_string(Split split);
Split parse_split(const std::string& s);

using AudioRef = std::variant<std::filesystem::path, Waveform>;

struct Utterance {
  std::string id;
  std::string speaker_id;
  EmotionLabel label;
  Split split = Split::kTrain;
  AudioRef audio;
};

Waveform load_audio(const Utterance& utt);

std::vector<Utterance> filter_split(const std::vector<Utterance>& utts, Split split);

// Throws on duplicate ids.
void check_unique_ids(const std::vector<Utterance>& utts);

// Tab-separated `id path speaker label split`, one row per utterance. Paths
// are written relative to the manifest's directory when possible and read
// back relative to it.
void write_manifest(const std::vector<Utterance>& utts, const std::filesystem::path& path);
std::vector<Utterance> read_manifest(const std::filesystem::path& path,
                                     const std::string& neutral_name = "neutral");

LabelSet label_set_of(const std::vector<Utterance>& utts,
                      const std::string& neutral_name = "neutral");

struct NoiseCorpus {
  std::vector<Waveform> noise;
  std::vector<Waveform> music;
};

inline constexpr const char* kNoiseTag = "noise";
inline constexpr const char* kMusicTag = "music";

// `<tag> <path>` lines, paths relative to the manifest's directory.
void write_noise_manifest(const std::vector<std::pair<std::string, std::filesystem::path>>& rows,
                          const std::filesystem::path& path);
NoiseCorpus read_noise_corpus(const std::filesystem::path& manifest);

}  // namespace ser
