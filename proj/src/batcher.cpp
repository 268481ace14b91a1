#include "ser/batcher.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ser/error.hpp"

namespace ser {

BatchItem BatchItem::single(const Utterance& u) {
  BatchItem item;
  item.kind = Kind::kSingle;
  item.id_a = u.id;
  item.assigned_label = u.label;
  return item;
}

std::size_t EpochPlan::count_batches(Scheme batch_scheme) const {
  return static_cast<std::size_t>(
      std::count_if(batches.begin(), batches.end(),
                    [&](const BatchSpec& b) { return b.scheme == batch_scheme; }));
}

AugQuota augmentation_quota(std::size_t n_batches, Scheme scheme, double aug_fraction) {
  const auto n_aug = static_cast<std::size_t>(std::lround(aug_fraction * static_cast<double>(n_batches)));
  switch (scheme) {
    case Scheme::kNone: return {};
    case Scheme::kNeutralCP: return {n_aug, 0};
    case Scheme::kSameEmotionCP: return {0, n_aug};
    case Scheme::kNeutralPlusSameEmotionCP: return {n_aug - n_aug / 2, n_aug / 2};
  }
  return {};
}

std::vector<BatchItem> pair_ncp(const std::vector<Utterance>& batch, Rng& rng, bool* degenerate) {
  std::vector<std::size_t> neutrals;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].label.is_neutral) neutrals.push_back(i);
  }
  std::vector<BatchItem> items;
  items.reserve(batch.size());
  if (degenerate != nullptr) *degenerate = neutrals.empty();
  if (neutrals.empty()) {
    for (const auto& u : batch) items.push_back(BatchItem::single(u));
    return items;
  }
  for (const auto& x : batch) {
    const Utterance& partner = batch[neutrals[uniform_index(rng, neutrals.size())]];
    BatchItem item;
    item.kind = BatchItem::Kind::kConcat;
    item.id_a = x.id;
    item.id_b = partner.id;
    item.scheme = Scheme::kNeutralCP;
    item.order_swap = uniform_index(rng, 2) == 1;
    item.crop_seed = rng();
    item.assigned_label = concat_label(x.label, partner.label, Scheme::kNeutralCP);
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<BatchItem> pair_secp(const std::vector<Utterance>& batch, Rng& rng) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) groups[batch[i].label.name].push_back(i);

  std::vector<BatchItem> items;
  items.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& group = groups[batch[i].label.name];
    if (group.size() < 2) {
      items.push_back(BatchItem::single(batch[i]));
      continue;
    }
    // Uniform over the other members: draw from size-1 slots, skip self.
    const auto self = static_cast<std::size_t>(
        std::find(group.begin(), group.end(), i) - group.begin());
    std::size_t pick = uniform_index(rng, group.size() - 1);
    if (pick >= self) ++pick;
    const Utterance& partner = batch[group[pick]];
    BatchItem item;
    item.kind = BatchItem::Kind::kConcat;
    item.id_a = batch[i].id;
    item.id_b = partner.id;
    item.scheme = Scheme::kSameEmotionCP;
    item.order_swap = uniform_index(rng, 2) == 1;
    item.crop_seed = rng();
    item.assigned_label = concat_label(batch[i].label, partner.label, Scheme::kSameEmotionCP);
    items.push_back(std::move(item));
  }
  return items;
}

EpochPlan plan_epoch(const std::vector<Utterance>& corpus, std::size_t batch_size, Scheme scheme,
                     double aug_fraction, std::uint64_t seed) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyInput, "plan_epoch: empty corpus");
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  if (!(aug_fraction >= 0.0 && aug_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "augmentation fraction must lie in [0, 1]");
  }

  Rng rng(seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_batches = (corpus.size() + batch_size - 1) / batch_size;
  const AugQuota quota = augmentation_quota(n_batches, scheme, aug_fraction);

  std::vector<Scheme> kinds(n_batches, Scheme::kNone);
  std::fill_n(kinds.begin(), quota.ncp, Scheme::kNeutralCP);
  std::fill_n(kinds.begin() + static_cast<std::ptrdiff_t>(quota.ncp), quota.secp,
              Scheme::kSameEmotionCP);
  std::shuffle(kinds.begin(), kinds.end(), rng);

  EpochPlan plan;
  plan.seed = seed;
  plan.scheme = scheme;
  plan.aug_fraction = aug_fraction;
  plan.batches.resize(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    std::vector<Utterance> members;
    const std::size_t end = std::min(corpus.size(), (b + 1) * batch_size);
    for (std::size_t i = b * batch_size; i < end; ++i) members.push_back(corpus[order[i]]);

    BatchSpec& spec = plan.batches[b];
    spec.scheme = kinds[b];
    if (kinds[b] == Scheme::kNeutralCP) {
      bool degenerate = false;
      spec.items = pair_ncp(members, rng, &degenerate);
      if (degenerate) {
        plan.warnings.push_back("batch " + std::to_string(b) +
                                ": no neutral utterance, N-CP skipped");
      }
    } else if (kinds[b] == Scheme::kSameEmotionCP) {
      spec.items = pair_secp(members, rng);
    } else {
      for (const auto& u : members) spec.items.push_back(BatchItem::single(u));
    }
  }
  return plan;
}

namespace {

const FeatureMatrix& lookup(const FeatureStore& store, const std::string& id) {
  auto it = store.find(id);
  if (it == store.end()) {
    throw Error(ErrorCode::kMissingFeatures, "no features for utterance '" + id + "'");
  }
  return it->second;
}

}  // namespace

std::vector<Example> materialize_batch(const BatchSpec& spec, const FeatureStore& store,
                                       double crop_seconds) {
  std::vector<Example> out;
  out.reserve(spec.items.size());
  for (const auto& item : spec.items) {
    if (!item.is_concat()) {
      out.push_back({lookup(store, item.id_a), item.assigned_label});
      continue;
    }
    Rng rng(item.crop_seed);
    FeatureMatrix a = random_crop(lookup(store, item.id_a), crop_seconds, rng);
    FeatureMatrix b = random_crop(lookup(store, item.id_b), crop_seconds, rng);
    out.push_back({concat_features(a, b, item.order_swap), item.assigned_label});
  }
  return out;
}

void write_epoch_plan(const EpochPlan& plan, std::ostream& out) {
  out << "# seed=" << plan.seed << " scheme=" << to_string(plan.scheme)
      << " aug_fraction=" << plan.aug_fraction << '\n';
  for (const auto& batch : plan.batches) {
    out << "B:" << to_string(batch.scheme);
    for (const auto& item : batch.items) {
      if (item.is_concat()) {
        out << " C:" << item.id_a << ':' << item.id_b << ':' << to_string(item.scheme) << ':'
            << (item.order_swap ? 1 : 0) << ':' << item.crop_seed;
      } else {
        out << " S:" << item.id_a;
      }
    }
    out << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string p;
  while (std::getline(ss, p, sep)) parts.push_back(p);
  return parts;
}

}  // namespace

EpochPlan read_epoch_plan(std::istream& in, const std::vector<Utterance>& corpus) {
  std::unordered_map<std::string, const Utterance*> by_id;
  for (const auto& u : corpus) by_id[u.id] = &u;
  auto find = [&](const std::string& id) -> const Utterance& {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::kParse, "epoch plan names unknown id '" + id + "'");
    return *it->second;
  };

  EpochPlan plan;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::stringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (key == "seed") plan.seed = std::stoull(value);
        if (key == "scheme") plan.scheme = parse_scheme(value);
        if (key == "aug_fraction") plan.aug_fraction = std::stod(value);
      }
      continue;
    }
    std::stringstream ss(line);
    std::string token;
    BatchSpec batch;
    while (ss >> token) {
      if (token.rfind("B:", 0) == 0) {
        batch.scheme = parse_scheme(token.substr(2));
      } else if (token.rfind("S:", 0) == 0) {
        batch.items.push_back(BatchItem::single(find(token.substr(2))));
      } else if (token.rfind("C:", 0) == 0) {
        auto f = split(token.substr(2), ':');
        if (f.size() != 5) throw Error(ErrorCode::kParse, "malformed concat item '" + token + "'");
        BatchItem item;
        item.kind = BatchItem::Kind::kConcat;
        item.id_a = f[0];
        item.id_b = f[1];
        item.scheme = parse_scheme(f[2]);
        if (f[3] != "0" && f[3] != "1") {
          throw Error(ErrorCode::kParse, "malformed swap flag in '" + token + "'");
        }
        item.order_swap = f[3] == "1";
        item.crop_seed = std::stoull(f[4]);
        item.assigned_label = concat_label(find(f[0]).label, find(f[1]).label, item.scheme);
        batch.items.push_back(std::move(item));
      } else {
        throw Error(ErrorCode::kParse, "unknown epoch plan token '" + token + "'");
      }
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

}  // namespace ser
