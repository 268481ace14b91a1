#include "ser/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ser/error.hpp"

namespace ser {

LabelSet::LabelSet(std::vector<std::string> names, const std::string& neutral_name) {
  bool found = false;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bool neutral = names[i] == neutral_name;
    if (neutral) {
      if (found) throw Error(ErrorCode::kInvalidArgument, "duplicate neutral label");
      found = true;
      neutral_ = i;
    }
    labels_.push_back({names[i], neutral});
  }
  if (!found) {
    throw Error(ErrorCode::kInvalidArgument,
                "label set has no neutral label '" + neutral_name + "'");
  }
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) {
    throw Error(ErrorCode::kInvalidArgument, "label set has duplicate names");
  }
}

LabelSet LabelSet::from_names(const std::vector<std::string>& names,
                              const std::string& neutral_name) {
  std::set<std::string> unique(names.begin(), names.end());
  return LabelSet(std::vector<std::string>(unique.begin(), unique.end()), neutral_name);
}

std::optional<std::size_t> LabelSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t LabelSet::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw Error(ErrorCode::kInvalidArgument, "unknown label '" + name + "'");
}

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw Error(ErrorCode::kParse, "unknown split '" + s + "'");
}

Waveform load_audio(const Utterance& utt) {
  if (const auto* wave = std::get_if<Waveform>(&utt.audio)) return *wave;
  return read_wav(std::get<std::filesystem::path>(utt.audio));
}

std::vector<Utterance> filter_split(const std::vector<Utterance>& utts, Split split) {
  std::vector<Utterance> out;
  for (const auto& u : utts) {
    if (u.split == split) out.push_back(u);
  }
  return out;
}

void check_unique_ids(const std::vector<Utterance>& utts) {
  std::set<std::string> seen;
  for (const auto& u : utts) {
    if (!seen.insert(u.id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate utterance id '" + u.id + "'");
    }
  }
}

namespace {

// `file` relative to the absolute directory `base`, falling back to the
// absolute path when no relative form exists.
std::filesystem::path relative_to(const std::filesystem::path& file,
                                  const std::filesystem::path& base) {
  const auto abs = std::filesystem::absolute(file);
  auto rel = abs.lexically_relative(base);
  return rel.empty() ? abs : rel;
}

}  // namespace

void write_manifest(const std::vector<Utterance>& utts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kUnwritablePath, "cannot write " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  for (const auto& u : utts) {
    const auto* audio = std::get_if<std::filesystem::path>(&u.audio);
    if (audio == nullptr) {
      throw Error(ErrorCode::kInvalidArgument,
                  "utterance '" + u.id + "' has inline audio; write it to disk first");
    }
    const auto rel = relative_to(*audio, base);
    out << u.id << '\t' << rel.generic_string() << '\t' << u.speaker_id << '\t' << u.label.name
        << '\t' << to_string(u.split) << '\n';
  }
  if (!out) throw Error(ErrorCode::kUnwritablePath, "short write to " + path.string());
}

std::vector<Utterance> read_manifest(const std::filesystem::path& path,
                                     const std::string& neutral_name) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open manifest " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  std::vector<Utterance> utts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 5) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) +
                                         ": expected 5 tab-separated fields");
    }
    Utterance u;
    u.id = fields[0];
    std::filesystem::path audio(fields[1]);
    u.audio = audio.is_absolute() ? audio : base / audio;
    u.speaker_id = fields[2];
    u.label = {fields[3], fields[3] == neutral_name};
    u.split = parse_split(fields[4]);
    utts.push_back(std::move(u));
  }
  check_unique_ids(utts);
  return utts;
}

LabelSet label_set_of(const std::vector<Utterance>& utts, const std::string& neutral_name) {
  std::vector<std::string> names;
  for (const auto& u : utts) names.push_back(u.label.name);
  return LabelSet::from_names(names, neutral_name);
}

void write_noise_manifest(const std::vector<std::pair<std::string, std::filesystem::path>>& rows,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kUnwritablePath, "cannot write " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  for (const auto& [tag, file] : rows) {
    const auto rel = relative_to(file, base);
    out << tag << ' ' << rel.generic_string() << '\n';
  }
}

NoiseCorpus read_noise_corpus(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open noise manifest " + manifest.string());
  const auto base = manifest.parent_path();
  NoiseCorpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string tag, file;
    if (!(ss >> tag >> file)) {
      throw Error(ErrorCode::kParse, manifest.string() + ": malformed line '" + line + "'");
    }
    std::filesystem::path p(file);
    if (!p.is_absolute()) p = base / p;
    if (tag == kNoiseTag) {
      corpus.noise.push_back(read_wav(p));
    } else if (tag == kMusicTag) {
      corpus.music.push_back(read_wav(p));
    } else {
      throw Error(ErrorCode::kParse, manifest.string() + ": unknown tag '" + tag + "'");
    }
  }
  return corpus;
}

}  // namespace ser
