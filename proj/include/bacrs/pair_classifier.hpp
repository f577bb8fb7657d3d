#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bacrs/behavior.hpp"
#include "bacrs/behavior_metrics.hpp"
#include "bacrs/corpus.hpp"
#include "bacrs/error.hpp"
#include "bacrs/features.hpp"
#include "bacrs/hash.hpp"
#include "bacrs/linear_model.hpp"
#include "bacrs/random.hpp"

namespace bacrs {

using LabeledSentence = std::pair<std::string, BehaviorLabel>;

// ---------------------------------------------------------------------------
// Multi-class behavior classifier

struct MulticlassModel {
  FeatureConfig config;
  TrainHyper hyper;
  LinearParams params;  // kNumBehaviors x block_dim

  std::array<double, kNumBehaviors> predict_proba(std::string_view text) const {
    const auto x = featurize_text(text, config);
    std::array<double, kNumBehaviors> z{};
    for (std::size_t c = 0; c < kNumBehaviors; ++c)
      z[c] = sparse_dot(std::span<const double>(params.weights).subspan(c * params.dim, params.dim), x) + params.bias[c];
    softmax_inplace(z);
    return z;
  }

  BehaviorLabel predict(std::string_view text) const {
    const auto p = predict_proba(text);
    return behavior_at(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
};

inline MulticlassModel train_multiclass(std::span<const LabeledSentence> sentences, const FeatureConfig& config,
                                        const TrainHyper& hyper) {
  config.validate();
  std::set<BehaviorLabel> distinct;
  for (const auto& s : sentences) distinct.insert(s.second);
  if (distinct.size() < 2) throw data_error("multiclass training needs at least 2 distinct behavior labels");
  Dataset data;
  data.x.reserve(sentences.size());
  for (const auto& [text, label] : sentences) {
    data.x.push_back(featurize_text(text, config));
    data.y.push_back(static_cast<int>(index_of(label)));
  }
  MulticlassModel m;
  m.config = config;
  m.hyper = hyper;
  m.params = train_linear(data, kNumBehaviors, config.block_dim(), hyper);
  return m;
}

// Stratified seeded split: round(test_fraction * n_c) sentences of every
// class go to the test side (at least one when the class has two or more).
inline std::pair<std::vector<LabeledSentence>, std::vector<LabeledSentence>> split_train_test(
    std::span<const LabeledSentence> sentences, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw usage_error("test_fraction must be in (0, 1)");
  std::array<std::vector<std::size_t>, kNumBehaviors> by_class;
  for (std::size_t i = 0; i < sentences.size(); ++i) by_class[index_of(sentences[i].second)].push_back(i);
  std::vector<char> to_test(sentences.size(), 0);
  for (std::size_t c = 0; c < kNumBehaviors; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2) continue;
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(idx));
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    for (std::size_t k = 0; k < n_test; ++k) to_test[idx[k]] = 1;
  }
  std::pair<std::vector<LabeledSentence>, std::vector<LabeledSentence>> out;
  for (std::size_t i = 0; i < sentences.size(); ++i) (to_test[i] ? out.second : out.first).push_back(sentences[i]);
  return out;
}

// Rows are true labels, columns are predictions.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumBehaviors>, kNumBehaviors> counts{};

  std::uint64_t row_sum(std::size_t r) const {
    std::uint64_t s = 0;
    for (auto v : counts[r]) s += v;
    return s;
  }

  std::uint64_t col_sum(std::size_t c) const {
    std::uint64_t s = 0;
    for (const auto& row : counts) s += row[c];
    return s;
  }
};

using AccuracyMap = std::map<BehaviorLabel, double>;

// Per-class accuracy (diagonal / row sum) for classes present in the test set.
inline AccuracyMap per_class_accuracy(const ConfusionMatrix& cm) {
  AccuracyMap acc;
  for (std::size_t r = 0; r < kNumBehaviors; ++r) {
    const auto n = cm.row_sum(r);
    if (n > 0) acc[behavior_at(r)] = static_cast<double>(cm.counts[r][r]) / static_cast<double>(n);
  }
  return acc;
}

inline std::pair<ConfusionMatrix, AccuracyMap> confusion_and_accuracy(const MulticlassModel& model,
                                                                      std::span<const LabeledSentence> test) {
  if (test.empty()) throw data_error("confusion matrix needs a non-empty test set");
  ConfusionMatrix cm;
  for (const auto& [text, label] : test) ++cm.counts[index_of(label)][index_of(model.predict(text))];
  return {cm, per_class_accuracy(cm)};
}

struct HardPair {
  BehaviorLabel cls;
  BehaviorLabel partner;

  friend bool operator==(const HardPair&, const HardPair&) = default;
};

// For every class whose accuracy is below `threshold`, its most frequent
// off-diagonal prediction. Ties go to the larger column total, then to the
// lexicographically smaller label. Output is in label order.
inline std::vector<HardPair> mine_hard_negative_classes(const AccuracyMap& accuracy, const ConfusionMatrix& cm,
                                                        double threshold = 0.7,
                                                        std::vector<std::string>* warnings = nullptr) {
  std::vector<HardPair> out;
  for (const auto& [cls, acc] : accuracy) {
    if (!(acc < threshold)) continue;
    const std::size_t r = index_of(cls);
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < kNumBehaviors; ++c) {
      if (c == r || cm.counts[r][c] == 0) continue;
      if (!best) {
        best = c;
        continue;
      }
      const auto cur = cm.counts[r][c];
      const auto top = cm.counts[r][*best];
      if (cur > top || (cur == top && cm.col_sum(c) > cm.col_sum(*best))) best = c;
    }
    if (!best) {
      if (warnings)
        warnings->push_back("class " + std::string(to_string(cls)) +
                            " is below the accuracy threshold but has no off-diagonal confusions; skipped");
      continue;
    }
    out.push_back({cls, behavior_at(*best)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sentence-pair training sets

struct TrainingSetSizes {
  std::size_t n_pos = 50000;
  std::size_t n_neg = 50000;
  std::size_t n_hard = 10000;
};

struct TrainingSets {
  std::vector<SentencePair> original;
  std::vector<SentencePair> mixed_hard;
  // Source sentence indices for each emitted pair, parallel to the lists above.
  std::vector<std::pair<std::size_t, std::size_t>> original_sources;
  std::vector<std::pair<std::size_t, std::size_t>> mixed_hard_sources;
  TrainingSetSizes requested;
  TrainingSetSizes effective;
  double scale = 1.0;
};

// Positives and negatives are sampled uniformly over the distinct same-label
// and different-label sentence pairs; hard negatives uniformly pick a
// (class, partner) pair and then one sentence from each side. When the corpus
// cannot supply the request with 2x headroom every count is scaled by the
// same factor.
inline TrainingSets build_training_sets(std::span<const LabeledSentence> sentences, const TrainingSetSizes& sizes,
                                        std::span<const HardPair> hard_pairs, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumBehaviors> by_class;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (detail::is_blank(sentences[i].first)) throw data_error("labeled sentence " + std::to_string(i) + " is empty");
    by_class[index_of(sentences[i].second)].push_back(i);
  }
  for (const auto& hp : hard_pairs)
    for (auto c : {hp.cls, hp.partner})
      if (by_class[index_of(c)].size() < 2)
        throw data_error("hard-negative class " + std::string(to_string(c)) + " has fewer than 2 sentences");

  std::array<double, kNumBehaviors> pos_weight{};
  double cap_pos = 0.0;
  for (std::size_t c = 0; c < kNumBehaviors; ++c) {
    const double n = static_cast<double>(by_class[c].size());
    pos_weight[c] = n * (n - 1) / 2;
    cap_pos += pos_weight[c];
  }
  const double total = static_cast<double>(sentences.size());
  const double cap_neg = total * (total - 1) / 2 - cap_pos;
  double cap_hard = 0.0;
  for (const auto& hp : hard_pairs)
    cap_hard += static_cast<double>(by_class[index_of(hp.cls)].size() * by_class[index_of(hp.partner)].size());

  TrainingSets out;
  out.requested = sizes;
  double scale = 1.0;
  auto limit = [&](std::size_t want, double cap) {
    if (want > 0) scale = std::min(scale, 0.5 * cap / static_cast<double>(want));
  };
  limit(sizes.n_pos, cap_pos);
  limit(sizes.n_neg, cap_neg);
  if (!hard_pairs.empty()) limit(sizes.n_hard, cap_hard);
  scale = std::max(scale, 0.0);
  out.scale = scale;
  auto scaled = [&](std::size_t n) { return static_cast<std::size_t>(std::floor(static_cast<double>(n) * scale)); };
  out.effective = {scaled(sizes.n_pos), scaled(sizes.n_neg), hard_pairs.empty() ? 0 : scaled(sizes.n_hard)};
  out.effective.n_hard = std::min(out.effective.n_hard, out.effective.n_neg);

  Rng rng(seed);
  std::set<std::pair<std::size_t, std::size_t>> used;
  auto key = [](std::size_t a, std::size_t b) { return std::pair{std::min(a, b), std::max(a, b)}; };
  auto oriented = [&](std::size_t a, std::size_t b) {
    return rng.bernoulli(0.5) ? std::pair{a, b} : std::pair{b, a};
  };

  std::vector<std::pair<std::size_t, std::size_t>> pos;
  std::vector<std::pair<std::size_t, std::size_t>> neg;
  const auto cap_pos_int = static_cast<std::uint64_t>(cap_pos);
  while (pos.size() < out.effective.n_pos) {
    auto r = static_cast<double>(rng.uniform_index(static_cast<std::size_t>(cap_pos_int)));
    std::size_t c = 0;
    while (r >= pos_weight[c]) r -= pos_weight[c++];
    const auto& idx = by_class[c];
    const std::size_t i = idx[rng.uniform_index(idx.size())];
    const std::size_t j = idx[rng.uniform_index(idx.size())];
    if (i == j || !used.insert(key(i, j)).second) continue;
    pos.push_back(oriented(i, j));
  }
  while (neg.size() < out.effective.n_neg) {
    const std::size_t i = rng.uniform_index(sentences.size());
    const std::size_t j = rng.uniform_index(sentences.size());
    if (sentences[i].second == sentences[j].second || !used.insert(key(i, j)).second) continue;
    neg.push_back(oriented(i, j));
  }

  struct Slot {
    std::pair<std::size_t, std::size_t> src;
    bool positive;
  };
  std::vector<Slot> slots;
  slots.reserve(pos.size() + neg.size());
  for (const auto& p : pos) slots.push_back({p, true});
  for (const auto& p : neg) slots.push_back({p, false});
  rng.shuffle(std::span<Slot>(slots));

  auto emit = [&](const std::pair<std::size_t, std::size_t>& src, PairLabel label, PairSource source) {
    return SentencePair{sentences[src.first].first, sentences[src.second].first, label, source};
  };
  std::vector<std::size_t> negative_slots;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto& s = slots[k];
    out.original.push_back(
        emit(s.src, s.positive ? PairLabel::same_behavior : PairLabel::different_behavior, PairSource::original));
    out.original_sources.push_back(s.src);
    if (!s.positive) negative_slots.push_back(k);
  }

  out.mixed_hard = out.original;
  out.mixed_hard_sources = out.original_sources;
  // Partial Fisher-Yates: the first n_hard entries are a uniform sample of negatives.
  for (std::size_t k = 0; k < out.effective.n_hard; ++k)
    std::swap(negative_slots[k], negative_slots[k + rng.uniform_index(negative_slots.size() - k)]);
  for (std::size_t k = 0; k < out.effective.n_hard; ++k) {
    std::pair<std::size_t, std::size_t> src;
    for (;;) {
      const auto& hp = hard_pairs[rng.uniform_index(hard_pairs.size())];
      const auto& a = by_class[index_of(hp.cls)];
      const auto& b = by_class[index_of(hp.partner)];
      const std::size_t i = a[rng.uniform_index(a.size())];
      const std::size_t j = b[rng.uniform_index(b.size())];
      if (!used.insert(key(i, j)).second) continue;
      src = oriented(i, j);
      break;
    }
    const std::size_t slot = negative_slots[k];
    out.mixed_hard[slot] = emit(src, PairLabel::different_behavior, PairSource::hard_negative);
    out.mixed_hard_sources[slot] = src;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pair classifier

enum class TrainingSetKind { original, mixed_hard };

inline std::string_view to_string(TrainingSetKind k) { return k == TrainingSetKind::original ? "original" : "mixed_hard"; }

struct PairClassifierModel {
  FeatureConfig config;
  TrainHyper hyper;
  TrainingSetKind training_set_kind = TrainingSetKind::original;
  std::vector<double> weights;  // pair_feature_dim(config)
  double bias = 0.0;
  std::vector<double> loss_history;

  double score(const FeatureVector& x) const { return sparse_dot(weights, x) + bias; }
};

// Featurizes pairs on demand so large training sets need no feature cache.
class PairExamples {
public:
  PairExamples(std::span<const SentencePair> pairs, const FeatureConfig& config, bool cache)
      : pairs_(pairs), config_(config) {
    if (cache) {
      cached_.reserve(pairs.size());
      for (const auto& p : pairs) cached_.push_back(featurize_pair(p.text_a, p.text_b, config));
    }
  }

  std::size_t size() const { return pairs_.size(); }
  int label(std::size_t i) const { return pairs_[i].label == PairLabel::same_behavior ? 1 : 0; }
  FeatureVector features(std::size_t i) const {
    if (!cached_.empty()) return cached_[i];
    return featurize_pair(pairs_[i].text_a, pairs_[i].text_b, config_);
  }

private:
  std::span<const SentencePair> pairs_;
  FeatureConfig config_;
  std::vector<FeatureVector> cached_;
};

inline void require_both_labels(std::span<const SentencePair> pairs, std::string_view what) {
  bool pos = false;
  bool neg = false;
  for (const auto& p : pairs) (p.label == PairLabel::same_behavior ? pos : neg) = true;
  if (!pos || !neg) throw data_error(std::string(what) + ": both same_behavior and different_behavior pairs are required");
}

inline constexpr std::size_t kFeatureCacheLimit = 20000;

template <ExampleSource Source>
PairClassifierModel train_pair_classifier_on(const Source& examples, TrainingSetKind kind, const FeatureConfig& config,
                                             const TrainHyper& hyper) {
  PairClassifierModel m;
  m.config = config;
  m.hyper = hyper;
  m.training_set_kind = kind;
  auto params = train_linear(examples, 1, pair_feature_dim(config), hyper);
  m.weights = std::move(params.weights);
  m.bias = params.bias[0];
  m.loss_history = std::move(params.loss_history);
  return m;
}

// Logistic regression over pair features. The training-set kind is
// mixed_hard when any pair is a hard negative.
inline PairClassifierModel train_pair_classifier(std::span<const SentencePair> pairs, const FeatureConfig& config,
                                                 const TrainHyper& hyper) {
  config.validate();
  require_both_labels(pairs, "pair classifier training");
  const bool hard = std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.source == PairSource::hard_negative; });
  PairExamples examples(pairs, config, pairs.size() <= kFeatureCacheLimit);
  return train_pair_classifier_on(examples, hard ? TrainingSetKind::mixed_hard : TrainingSetKind::original, config,
                                  hyper);
}

inline double predict_same(const PairClassifierModel& model, std::string_view text_a, std::string_view text_b) {
  return sigmoid(model.score(featurize_pair(text_a, text_b, model.config)));
}

// What a pair scorer sees of one response. Labels are available only to
// oracle scorers used for testing.
struct ResponseView {
  std::string_view text;
  std::optional<BehaviorLabel> behavior;
};

template <class S>
concept PairScorer = requires(const S& s, const ResponseView& a, const ResponseView& b) {
  { s.probability_same(a, b) } -> std::convertible_to<double>;
};

class LinearPairScorer {
public:
  explicit LinearPairScorer(const PairClassifierModel& model) : model_(&model) {}
  double probability_same(const ResponseView& a, const ResponseView& b) const {
    return predict_same(*model_, a.text, b.text);
  }

private:
  const PairClassifierModel* model_;
};

// Reads the true labels.
class OraclePairScorer {
public:
  double probability_same(const ResponseView& a, const ResponseView& b) const {
    if (!a.behavior || !b.behavior) throw data_error("oracle scorer needs behavior labels");
    return *a.behavior == *b.behavior ? 1.0 - 1e-12 : 1e-12;
  }
};

struct CrossValidationResult {
  std::vector<double> fold_accuracies;
  std::vector<std::vector<std::size_t>> fold_test_indices;
  double mean = 0.0;
  double spread = 0.0;  // max - min fold accuracy
};

inline double pair_accuracy(const PairClassifierModel& model, std::span<const SentencePair> pairs, double threshold = 0.5) {
  if (pairs.empty()) throw data_error("accuracy of an empty pair set");
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const bool same = predict_same(model, p.text_a, p.text_b) >= threshold;
    correct += same == (p.label == PairLabel::same_behavior);
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// Seeded shuffle, k contiguous folds, train on k-1 and test on the held-out one.
inline CrossValidationResult cross_validate(std::span<const SentencePair> pairs, int k, const FeatureConfig& config,
                                            const TrainHyper& hyper, double threshold = 0.5) {
  if (k < 2) throw usage_error("cross-validation needs k >= 2");
  if (pairs.size() < static_cast<std::size_t>(k)) throw data_error("cross-validation needs at least k pairs");
  config.validate();
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(hyper.seed);
  rng.shuffle(std::span<std::size_t>(order));

  const bool cache = pairs.size() <= kFeatureCacheLimit;
  CrossValidationResult r;
  const std::size_t n = pairs.size();
  const auto uk = static_cast<std::size_t>(k);
  for (std::size_t f = 0; f < uk; ++f) {
    const std::size_t begin = n * f / uk;
    const std::size_t end = n * (f + 1) / uk;
    std::vector<SentencePair> train;
    std::vector<SentencePair> test;
    std::vector<std::size_t> test_idx;
    for (std::size_t p = 0; p < n; ++p) {
      if (p >= begin && p < end) {
        test.push_back(pairs[order[p]]);
        test_idx.push_back(order[p]);
      } else {
        train.push_back(pairs[order[p]]);
      }
    }
    require_both_labels(train, "fold " + std::to_string(f) + " training split");
    require_both_labels(test, "fold " + std::to_string(f) + " test split");
    const bool hard = std::any_of(train.begin(), train.end(), [](const auto& p) { return p.source == PairSource::hard_negative; });
    PairExamples examples(train, config, cache);
    const auto model = train_pair_classifier_on(examples, hard ? TrainingSetKind::mixed_hard : TrainingSetKind::original,
                                                config, hyper);
    r.fold_accuracies.push_back(pair_accuracy(model, test, threshold));
    r.fold_test_indices.push_back(std::move(test_idx));
  }
  double sum = 0.0;
  for (double a : r.fold_accuracies) sum += a;
  r.mean = sum / static_cast<double>(k);
  const auto [lo, hi] = std::minmax_element(r.fold_accuracies.begin(), r.fold_accuracies.end());
  r.spread = *hi - *lo;
  return r;
}

// Alignment estimated without labels: a scored turn counts as aligned when
// the scorer's same-behavior probability for (system, human) reaches the
// threshold. Aggregation matches behavior_alignment.
template <PairScorer Scorer>
AlignmentReport implicit_behavior_alignment(const Scorer& scorer, std::span<const EvalInstance> instances,
                                            std::string_view system,
                                            NormalizationMode mode = NormalizationMode::scored_turns,
                                            double threshold = 0.5) {
  return detail::assemble_report(
      instances, system, mode,
      [&](const EvalInstance& inst) {
        auto it = inst.system_responses.find(std::string(system));
        if (it == inst.system_responses.end()) return -1;
        const ResponseView sys{it->second.text, it->second.behavior};
        const ResponseView human{inst.human_text, inst.human_behavior};
        return scorer.probability_same(sys, human) >= threshold ? 1 : 0;
      },
      "missing responses");
}

// ---------------------------------------------------------------------------
// Model files

inline constexpr std::string_view kPairModelFormat = "bacrs-pair-model";
inline constexpr int kPairModelVersion = 1;

inline nlohmann::json feature_config_json(const FeatureConfig& c) {
  return {{"hash_bits", c.hash_bits},           {"word_ngram_min", c.word_ngram_min},
          {"word_ngram_max", c.word_ngram_max}, {"char_ngram_min", c.char_ngram_min},
          {"char_ngram_max", c.char_ngram_max}, {"per_side_blocks", c.per_side_blocks}};
}

inline FeatureConfig feature_config_from_json(const nlohmann::json& j) {
  FeatureConfig c;
  c.hash_bits = j.at("hash_bits").get<int>();
  c.word_ngram_min = j.at("word_ngram_min").get<int>();
  c.word_ngram_max = j.at("word_ngram_max").get<int>();
  c.char_ngram_min = j.at("char_ngram_min").get<int>();
  c.char_ngram_max = j.at("char_ngram_max").get<int>();
  c.per_side_blocks = j.at("per_side_blocks").get<bool>();
  c.validate();
  return c;
}

// Weights are stored sparsely as [index, value] pairs.
inline nlohmann::json pair_model_json(const PairClassifierModel& m) {
  nlohmann::json weights = nlohmann::json::array();
  for (std::size_t i = 0; i < m.weights.size(); ++i)
    if (m.weights[i] != 0.0) weights.push_back({i, m.weights[i]});
  return {{"format", kPairModelFormat},
          {"version", kPairModelVersion},
          {"feature_config", feature_config_json(m.config)},
          {"feature_config_hash", m.config.fingerprint()},
          {"dim", m.weights.size()},
          {"training_set_kind", std::string(to_string(m.training_set_kind))},
          {"seed", m.hyper.seed},
          {"hyper",
           {{"learning_rate", m.hyper.learning_rate},
            {"epochs", m.hyper.epochs},
            {"batch_size", m.hyper.batch_size},
            {"l2", m.hyper.l2}}},
          {"loss_history", m.loss_history},
          {"bias", m.bias},
          {"weights", std::move(weights)}};
}

// Rejects files whose stored config hash does not match their config, or
// whose config differs from `expected` when given.
inline PairClassifierModel pair_model_from_json(const nlohmann::json& j,
                                                const std::optional<FeatureConfig>& expected = std::nullopt) {
  try {
    if (j.at("format").get<std::string>() != kPairModelFormat) throw data_error("not a pair model file");
    if (j.at("version").get<int>() != kPairModelVersion)
      throw data_error("unsupported pair model version " + std::to_string(j.at("version").get<int>()));
    PairClassifierModel m;
    m.config = feature_config_from_json(j.at("feature_config"));
    if (j.at("feature_config_hash").get<std::string>() != m.config.fingerprint())
      throw data_error("pair model feature-config hash mismatch");
    if (expected && expected->fingerprint() != m.config.fingerprint())
      throw data_error("pair model was trained with feature config " + m.config.canonical() + ", expected " +
                       expected->canonical());
    const auto dim = j.at("dim").get<std::size_t>();
    if (dim != pair_feature_dim(m.config)) throw data_error("pair model dimension does not match its feature config");
    const auto kind = j.at("training_set_kind").get<std::string>();
    if (kind == "original") m.training_set_kind = TrainingSetKind::original;
    else if (kind == "mixed_hard") m.training_set_kind = TrainingSetKind::mixed_hard;
    else throw data_error("unknown training_set_kind \"" + kind + "\"");
    m.hyper.seed = j.at("seed").get<std::uint64_t>();
    const auto& h = j.at("hyper");
    m.hyper.learning_rate = h.at("learning_rate").get<double>();
    m.hyper.epochs = h.at("epochs").get<int>();
    m.hyper.batch_size = h.at("batch_size").get<int>();
    m.hyper.l2 = h.at("l2").get<double>();
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.weights.assign(dim, 0.0);
    for (const auto& e : j.at("weights")) {
      const auto i = e.at(0).get<std::size_t>();
      if (i >= dim) throw data_error("pair model weight index out of range");
      m.weights[i] = e.at(1).get<double>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed pair model: ") + e.what());
  }
}

inline void save_pair_model(const PairClassifierModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write model file: " + path);
  out << pair_model_json(m).dump() << '\n';
}

inline PairClassifierModel load_pair_model(const std::string& path,
                                           const std::optional<FeatureConfig>& expected = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw data_error(path + ": malformed JSON: " + e.what());
  }
  try {
    return pair_model_from_json(j, expected);
  } catch (const data_error& e) {
    throw data_error(path + ": " + e.what());
  }
}

}  // namespace bacrs
