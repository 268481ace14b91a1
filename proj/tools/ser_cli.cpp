#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ser/error.hpp"
#include "ser/eval.hpp"
#include "ser/features.hpp"
#include "ser/model.hpp"
#include "ser/noiseaug.hpp"
#include "ser/rng.hpp"
#include "ser/synthcorpus.hpp"
#include "ser/train.hpp"

namespace fs = std::filesystem;
using namespace ser;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

// Thrown for semantic usage problems found after parsing (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options that must be set by a flag or the config file. CLI11's own
// required() would fire before the config file is applied.
std::map<const CLI::App*, std::vector<std::string>>& required_options() {
  static std::map<const CLI::App*, std::vector<std::string>> table;
  return table;
}

CLI::Option* need(CLI::App* cmd, CLI::Option* opt) {
  required_options()[cmd].push_back(opt->get_name());
  opt->description(opt->get_description() + (opt->get_description().empty() ? "" : " ") + "[required]");
  return opt;
}

// `key = value` lines; '#' starts a comment. Values only fill options the
// command line left unset, and unknown keys are rejected.
void apply_config_file(CLI::App& cmd, const std::string& file) {
  if (file.empty()) return;
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot read config " + file);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    CLI::detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(file + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = CLI::detail::trim_copy(line.substr(0, eq));
    const std::string value = CLI::detail::trim_copy(line.substr(eq + 1));
    CLI::Option* opt = key == "config" ? nullptr : cmd.get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError(file + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

fs::path cache_root(const std::string& flag, const fs::path& manifest) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SER_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return manifest.parent_path() / "features";
}

std::string cache_name(const std::string& id) {
  std::string out;
  bool changed = false;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '#';
    out += ok ? c : '_';
    changed |= !ok;
  }
  if (changed) {
    std::ostringstream h;
    h << std::hex << hash_string(id);
    out += "_" + h.str();
  }
  return out + ".feat";
}

struct CacheStats {
  std::size_t computed = 0;
  std::size_t reused = 0;
  std::size_t vad_fallbacks = 0;
};

// Features for every utterance, reusing cache files newer than their WAV.
FeatureStore load_or_extract(const std::vector<Utterance>& utts, const fs::path& root,
                             CacheStats* stats = nullptr) {
  fs::create_directories(root);
  MfccExtractor mfcc;
  FeatureStore store;
  CacheStats local;
  for (const auto& u : utts) {
    const fs::path cache = root / cache_name(u.id);
    const auto* wav = std::get_if<fs::path>(&u.audio);
    std::error_code ec;
    if (wav != nullptr && fs::exists(cache, ec) && fs::exists(*wav, ec) &&
        fs::last_write_time(cache) >= fs::last_write_time(*wav)) {
      store.emplace(u.id, read_feature_cache(cache));
      ++local.reused;
      continue;
    }
    bool fallback = false;
    FeatureMatrix f;
    try {
      f = extract_features(mfcc, load_audio(u), {}, &fallback);
    } catch (const Error& e) {
      throw Error(e.code(), "utterance '" + u.id + "': " + e.what());
    }
    if (fallback) {
      ++local.vad_fallbacks;
      std::cerr << "warning: VAD kept no frames of '" << u.id << "', using all frames\n";
    }
    write_feature_cache(f, cache);
    // Match what a later cache hit would return.
    for (double& v : f.values) v = static_cast<double>(static_cast<float>(v));
    store.emplace(u.id, std::move(f));
    ++local.computed;
  }
  if (stats != nullptr) *stats = local;
  return store;
}

std::vector<Utterance> read_corpus(const fs::path& manifest) {
  auto utts = read_manifest(manifest);
  if (utts.empty()) throw Error(ErrorCode::kEmptyInput, "manifest " + manifest.string() + " is empty");
  check_unique_ids(utts);
  return utts;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  SynthConfig config;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* cmd = app.add_subcommand("synth", "generate the synthetic corpus and noise proxy");
  need(cmd, cmd->add_option("--out", a.out, "output directory"));
  cmd->add_option("--seed", a.config.seed, "corpus seed")->capture_default_str();
  cmd->add_option("--classes", a.config.n_classes)->capture_default_str()->check(CLI::Range(2, 64));
  cmd->add_option("--speakers", a.config.n_speakers)->capture_default_str()->check(CLI::Range(1, 10000));
  cmd->add_option("--utts-per-class", a.config.utts_per_speaker_per_class)->capture_default_str();
  cmd->add_option("--min-duration", a.config.min_duration_s)->capture_default_str();
  cmd->add_option("--max-duration", a.config.max_duration_s)->capture_default_str();
  cmd->add_option("--noise-files", a.config.noise_files)->capture_default_str();
  cmd->add_option("--music-files", a.config.music_files)->capture_default_str();
  cmd->add_option("--noise-duration", a.config.noise_duration_s)->capture_default_str();
}

int run_synth(const SynthArgs& a) {
  SynthCorpus corpus = generate_corpus(a.config, a.out);
  const fs::path noise = generate_noise_proxy(a.config, a.out);
  std::cerr << "wrote " << corpus.utterances.size() << " utterances to " << corpus.manifest.string()
            << "\nwrote noise manifest " << noise.string() << "\n";
  return 0;
}

// ---- features ----

struct FeaturesArgs {
  std::string manifest;
  std::string cache;
};

void add_features(CLI::App& app, FeaturesArgs& a) {
  auto* cmd = app.add_subcommand("features", "extract MFCC + VAD + mean normalization into the cache");
  need(cmd, cmd->add_option("--manifest", a.manifest));
  cmd->add_option("--cache", a.cache, "cache directory (default $SER_CACHE_DIR or <manifest dir>/features)");
}

int run_features(const FeaturesArgs& a) {
  const auto utts = read_corpus(a.manifest);
  const fs::path root = cache_root(a.cache, a.manifest);
  CacheStats stats;
  load_or_extract(utts, root, &stats);
  std::cerr << utts.size() << " utterances: " << stats.computed << " extracted, " << stats.reused
            << " cached, " << stats.vad_fallbacks << " VAD fallbacks -> " << root.string() << "\n";
  return 0;
}

// ---- shared training options ----

struct TrainArgs {
  std::string manifest;
  std::string cache;
  std::string scheme = "none";
  TrainConfig config;
};

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  need(cmd, cmd->add_option("--manifest", a.manifest));
  cmd->add_option("--cache", a.cache, "feature cache directory");
  cmd->add_option("--scheme", a.scheme, "none | n-cp | se-cp | n+se-cp")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "n-cp", "se-cp", "n+se-cp"}));
  cmd->add_option("--epochs", a.config.epochs)->capture_default_str();
  cmd->add_option("--seed", a.config.seed)->capture_default_str();
  cmd->add_option("--batch-size", a.config.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--aug-fraction", a.config.aug_fraction)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--crop-seconds", a.config.crop_seconds)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--lr", a.config.adam.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--hidden", a.config.model.hidden_dim)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--encoder-dim", a.config.model.encoder_dim)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--heads", a.config.model.heads)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--embedding", a.config.model.embedding_dim)->capture_default_str()->check(CLI::PositiveNumber);
}

TrainResult train_logged(const std::vector<Utterance>& train_set, const std::vector<Utterance>& dev,
                         const FeatureStore& store, const LabelSet& labels, TrainConfig config,
                         const std::string& tag) {
  TrainResult r = train(train_set, dev, store, labels, config, [&](const EpochLog& e) {
    std::cerr << tag << "epoch " << e.epoch << " loss " << fmt(e.train_loss) << " dev wF1 "
              << fmt(e.dev_weighted_f1) << "\n";
  });
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return r;
}

// ---- train ----

struct TrainCmdArgs {
  TrainArgs t;
  std::string out;
};

void add_train(CLI::App& app, TrainCmdArgs& a) {
  auto* cmd = app.add_subcommand("train", "train a model; writes model.bin and history.tsv");
  add_train_options(cmd, a.t);
  need(cmd, cmd->add_option("--out", a.out, "output directory"));
}

int run_train(TrainCmdArgs& a) {
  a.t.config.scheme = parse_scheme(a.t.scheme);
  const auto utts = read_corpus(a.t.manifest);
  const auto train_set = filter_split(utts, Split::kTrain);
  const auto dev = filter_split(utts, Split::kDev);
  const FeatureStore store = load_or_extract(utts, cache_root(a.t.cache, a.t.manifest));
  const LabelSet labels = label_set_of(utts);

  TrainResult r = train_logged(train_set, dev, store, labels, a.t.config, "");
  fs::create_directories(a.out);
  save_checkpoint(r.best_params, labels, fs::path(a.out) / "model.bin");
  std::ofstream hist(fs::path(a.out) / "history.tsv", std::ios::trunc);
  if (!hist) throw Error(ErrorCode::kUnwritablePath, "cannot write history in " + a.out);
  hist << std::setprecision(17);
  for (const auto& e : r.log) hist << e.epoch << "\t" << e.dev_weighted_f1 << "\t" << e.train_loss << "\n";
  std::cerr << "best epoch " << r.best_epoch << " -> " << (fs::path(a.out) / "model.bin").string() << "\n";
  return 0;
}

// ---- eval ----

struct EvalArgs {
  TrainArgs t;
  std::vector<std::string> checkpoints;
  std::string split = "test";
  std::size_t runs = 1;
  std::size_t folds = 0;
  std::string out;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand(
      "eval", "score checkpoints, or train --runs seeds and score them, or run 5-fold CV");
  add_train_options(cmd, a.t);
  cmd->add_option("--checkpoint", a.checkpoints, "model.bin to score (repeatable)");
  cmd->add_option("--split", a.split)->capture_default_str()->check(CLI::IsMember({"train", "dev", "test"}));
  cmd->add_option("--runs", a.runs, "training runs with seeds seed, seed+1, ...")
      ->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--folds", a.folds, "cross-validation folds (5)")->check(CLI::IsMember(std::vector<std::size_t>{0, 5}));
  cmd->add_option("--out", a.out, "directory for report files");
}

void emit_report(const EvalReport& r, const std::string& title, const std::string& out,
                 const std::string& file) {
  std::cout << "== " << title << "\n" << format_report(r);
  if (!out.empty()) write_report_kv(r, fs::path(out) / file);
}

int emit_summary(const std::vector<double>& scores, const std::string& out) {
  const RunSummary s = average_runs(scores);
  std::cout << "mean weighted F1 " << fmt(s.mean) << " (std " << fmt(s.stddev) << ", n "
            << scores.size() << ")\n";
  if (!out.empty()) {
    std::ofstream f(fs::path(out) / "summary.tsv", std::ios::trunc);
    if (!f) throw Error(ErrorCode::kUnwritablePath, "cannot write summary in " + out);
    f << std::setprecision(17) << "n\t" << scores.size() << "\nmean_weighted_f1\t" << s.mean
      << "\nstddev_weighted_f1\t" << s.stddev << "\n";
    for (std::size_t i = 0; i < scores.size(); ++i) f << "run" << i << "\t" << scores[i] << "\n";
  }
  return 0;
}

// Speakers are dealt round-robin (sorted order) into five sessions.
std::vector<std::vector<std::string>> speaker_sessions(const std::vector<Utterance>& utts) {
  std::set<std::string> speakers;
  for (const auto& u : utts) speakers.insert(u.speaker_id);
  if (speakers.size() < 5) throw Error(ErrorCode::kInvalidArgument, "5-fold mode needs at least 5 speakers");
  std::vector<std::vector<std::string>> sessions(5);
  std::size_t i = 0;
  for (const auto& s : speakers) sessions[i++ % 5].push_back(s);
  return sessions;
}

int run_eval(EvalArgs& a) {
  a.t.config.scheme = parse_scheme(a.t.scheme);
  if (!a.checkpoints.empty() && a.folds != 0) throw UsageError("--checkpoint and --folds are exclusive");
  if (!a.out.empty()) fs::create_directories(a.out);
  const auto utts = read_corpus(a.t.manifest);
  const fs::path cache = cache_root(a.t.cache, a.t.manifest);
  std::vector<double> scores;

  if (!a.checkpoints.empty()) {
    const auto target = filter_split(utts, parse_split(a.split));
    if (target.empty()) throw Error(ErrorCode::kEmptyInput, "no utterances in split " + a.split);
    // Load every checkpoint first so a missing one fails before extraction.
    std::vector<Checkpoint> models;
    for (const auto& c : a.checkpoints) models.push_back(load_checkpoint(c));
    const FeatureStore store = load_or_extract(target, cache);
    for (std::size_t i = 0; i < models.size(); ++i) {
      const EvalReport r = evaluate(target, store, models[i].labels, models[i].params);
      emit_report(r, a.checkpoints[i], a.out, "report_" + std::to_string(i) + ".tsv");
      scores.push_back(r.weighted_f1);
    }
    return emit_summary(scores, a.out);
  }

  const FeatureStore store = load_or_extract(utts, cache);
  const LabelSet labels = label_set_of(utts);

  if (a.folds == 5) {
    const auto sessions = speaker_sessions(utts);
    std::vector<std::string> names = {"0", "1", "2", "3", "4"};
    const CvPlan plan = kfold_plan(names);
    auto members = [&](const std::string& session) {
      const auto& spk = sessions[std::stoul(session)];
      std::vector<Utterance> out;
      for (const auto& u : utts) {
        if (std::find(spk.begin(), spk.end(), u.speaker_id) != spk.end()) out.push_back(u);
      }
      return out;
    };
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      std::vector<Utterance> train_set;
      for (const auto& s : plan.folds[f].train) {
        auto m = members(s);
        train_set.insert(train_set.end(), m.begin(), m.end());
      }
      const auto dev = members(plan.folds[f].dev), test = members(plan.folds[f].test);
      std::vector<double> fold_scores;
      for (std::size_t r = 0; r < a.runs; ++r) {
        TrainConfig cfg = a.t.config;
        cfg.seed = a.t.config.seed + r;
        const std::string tag = "fold " + std::to_string(f) + " run " + std::to_string(r) + ": ";
        TrainResult res = train_logged(train_set, dev, store, labels, cfg, tag);
        const EvalReport rep = evaluate(test, store, labels, res.best_params);
        emit_report(rep, tag + "test session " + plan.folds[f].test, a.out,
                    "fold" + std::to_string(f) + "_run" + std::to_string(r) + ".tsv");
        fold_scores.push_back(rep.weighted_f1);
      }
      scores.push_back(average_runs(fold_scores).mean);
    }
    return emit_summary(scores, a.out);
  }

  const auto train_set = filter_split(utts, Split::kTrain);
  const auto dev = filter_split(utts, Split::kDev);
  const auto target = filter_split(utts, parse_split(a.split));
  for (std::size_t r = 0; r < a.runs; ++r) {
    TrainConfig cfg = a.t.config;
    cfg.seed = a.t.config.seed + r;
    const std::string tag = "run " + std::to_string(r) + ": ";
    TrainResult res = train_logged(train_set, dev, store, labels, cfg, tag);
    const EvalReport rep = evaluate(target, store, labels, res.best_params);
    emit_report(rep, tag + "seed " + std::to_string(cfg.seed), a.out, "run" + std::to_string(r) + ".tsv");
    scores.push_back(rep.weighted_f1);
  }
  return emit_summary(scores, a.out);
}

// ---- noisify ----

struct NoisifyArgs {
  std::string manifest;
  std::string noise_manifest;
  std::string mode = "train";
  double snr = std::nan("");
  std::uint64_t seed = 1;
  std::string out;
};

void add_noisify(CLI::App& app, NoisifyArgs& a) {
  auto* cmd = app.add_subcommand("noisify", "build the Clean+Noise training set or a noisy test set");
  need(cmd, cmd->add_option("--manifest", a.manifest));
  need(cmd, cmd->add_option("--noise-manifest", a.noise_manifest, "`<tag> <path>` noise list"));
  cmd->add_option("--mode", a.mode)->capture_default_str()->check(CLI::IsMember({"train", "test"}));
  cmd->add_option("--snr", a.snr, "target SNR in dB (test mode)");
  cmd->add_option("--seed", a.seed)->capture_default_str();
  need(cmd, cmd->add_option("--out", a.out, "output directory"));
}

int run_noisify(const NoisifyArgs& a) {
  if (a.mode == "test" && !std::isfinite(a.snr)) throw UsageError("--mode test needs a finite --snr");
  if (a.mode == "train" && !std::isnan(a.snr)) throw UsageError("--snr only applies to --mode test");
  const auto utts = read_corpus(a.manifest);
  const NoiseCorpus noise = read_noise_corpus(a.noise_manifest);
  const fs::path out = a.out;
  fs::create_directories(out / "wav");
  std::ofstream report(out / "snr_report.tsv", std::ios::trunc);
  if (!report) throw Error(ErrorCode::kUnwritablePath, "cannot write in " + out.string());
  report << std::setprecision(17) << "id\ttag\ttarget_snr_db\tmeasured_snr_db\tnoise_index\n";

  CopySink sink = [&](NoisyCopy&& c) {
    const fs::path wav = out / "wav" / (c.utt.id + ".wav");
    write_wav(std::get<Waveform>(c.utt.audio), wav);
    report << c.utt.id << "\t" << c.tag << "\t" << c.target_snr_db << "\t" << c.measured_snr_db
           << "\t" << c.noise_index << "\n";
    c.utt.audio = fs::absolute(wav);
    return std::move(c.utt);
  };

  std::vector<Utterance> rows;
  if (a.mode == "train") {
    rows = build_augmented_trainset(filter_split(utts, Split::kTrain), noise, a.seed, sink);
    // Dev and test rows pass through so the manifest can drive training directly.
    for (const auto& u : utts) {
      if (u.split != Split::kTrain) rows.push_back(u);
    }
  } else {
    rows = make_noisy_testset(filter_split(utts, Split::kTest), noise, a.snr, a.seed, sink);
  }
  write_manifest(rows, out / "manifest.tsv");
  std::cerr << "wrote " << rows.size() << " rows to " << (out / "manifest.tsv").string() << "\n";
  return 0;
}

// ---- shapes ----

struct ShapesArgs {
  std::size_t frames = 160;
  std::size_t classes = 4;
};

void add_shapes(CLI::App& app, ShapesArgs& a) {
  auto* cmd = app.add_subcommand("shapes", "print the reference ResNet output sizes for T frames");
  cmd->add_option("--frames", a.frames)->capture_default_str();
  cmd->add_option("--classes", a.classes)->capture_default_str();
}

int run_shapes(const ShapesArgs& a) {
  for (const auto& s : validate_table1_shapes(a.frames, a.classes)) {
    std::cout << s.component << "\t" << s.layer << "\t" << s.size_string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech emotion recognition with CopyPaste augmentation"};
  app.require_subcommand(1);
  std::string config;

  SynthArgs synth;
  FeaturesArgs features;
  TrainCmdArgs train_args;
  EvalArgs eval;
  NoisifyArgs noisify;
  ShapesArgs shapes;
  add_synth(app, synth);
  add_features(app, features);
  add_train(app, train_args);
  add_eval(app, eval);
  add_noisify(app, noisify);
  add_shapes(app, shapes);
  for (auto* cmd : app.get_subcommands({})) {
    cmd->add_option("--config", config, "key = value file; command-line flags win");
  }

  try {
    app.parse(argc, argv);
    CLI::App* cmd = app.get_subcommands().front();
    apply_config_file(*cmd, config);
    for (const auto& name : required_options()[cmd]) {
      if (cmd->get_option(name)->count() == 0) throw CLI::RequiredError(name);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "synth") return run_synth(synth);
    if (name == "features") return run_features(features);
    if (name == "train") return run_train(train_args);
    if (name == "eval") return run_eval(eval);
    if (name == "noisify") return run_noisify(noisify);
    return run_shapes(shapes);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
