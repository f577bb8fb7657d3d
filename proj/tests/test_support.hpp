#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "bacrs/bacrs.hpp"

namespace bacrs::fixtures {

inline BehaviorLabel random_behavior(Rng& rng) { return behavior_at(rng.uniform_index(kNumBehaviors)); }

struct RandomCorpus {
  std::vector<Dialogue> dialogues;
  std::vector<ResponseRecord> responses;
  std::vector<EvalInstance> instances;
};

// Labeled dialogues with a response from every system at every recommender
// turn. System behaviors match the human one with probability `match_rate`.
inline RandomCorpus random_corpus(std::uint64_t seed, std::size_t n_dialogues,
                                  std::vector<std::string> systems = {"sys_a", "sys_b"}, double match_rate = 0.4) {
  Rng rng(seed);
  RandomCorpus c;
  for (std::size_t d = 0; d < n_dialogues; ++d) {
    Dialogue dlg;
    dlg.dialogue_id = "d" + std::to_string(d);
    const std::size_t n_turns = 1 + rng.uniform_index(10);
    bool recommender = rng.bernoulli(0.5);
    for (std::size_t t = 0; t < n_turns; ++t, recommender = !recommender) {
      Turn turn;
      turn.speaker = recommender ? Speaker::recommender : Speaker::seeker;
      turn.text = "turn " + std::to_string(t) + " word" + std::to_string(rng.uniform_index(50));
      if (recommender) {
        turn.behavior = random_behavior(rng);
        turn.is_recommendation = rng.bernoulli(0.3);
        if (turn.is_recommendation) turn.accepted = rng.bernoulli(0.5);
      }
      dlg.turns.push_back(turn);
      if (!recommender) continue;
      for (const auto& sys : systems) {
        ResponseRecord r;
        r.dialogue_id = dlg.dialogue_id;
        r.turn_index = static_cast<int>(t + 1);
        r.system = sys;
        r.behavior = rng.bernoulli(match_rate) ? *turn.behavior : random_behavior(rng);
        r.text = sys + " says " + std::string(to_string(*r.behavior)) + " " + std::to_string(rng.uniform_index(20));
        c.responses.push_back(r);
      }
    }
    c.dialogues.push_back(std::move(dlg));
  }
  c.instances = extract_eval_instances(c.dialogues, c.responses);
  return c;
}

// Sentences for each of the 13 classes. Every class draws from its own word
// list; a class listed in `confusable` also draws a fraction of its words
// from a list shared with its partner. `filler` words, shared by all classes,
// are mixed in with probability `filler_rate`.
struct ClassCorpusOptions {
  std::size_t per_class = 200;
  std::size_t vocab = 40;
  std::size_t min_len = 6;
  std::size_t max_len = 10;
  std::vector<std::pair<BehaviorLabel, BehaviorLabel>> confusable;
  double shared_rate = 0.0;
  std::size_t filler_vocab = 0;
  double filler_rate = 0.0;
  std::string style;  // prefix for filler words, so two styles do not overlap
};

inline std::string class_word(std::size_t cls, std::size_t k) {
  // letters only, so char n-grams of different classes differ too
  std::string w;
  w += static_cast<char>('a' + cls);
  w += static_cast<char>('a' + cls);
  for (std::size_t x = k + 1; x > 0; x /= 26) w += static_cast<char>('a' + x % 26);
  return w;
}

inline std::vector<LabeledSentence> class_corpus(std::uint64_t seed, const ClassCorpusOptions& opt) {
  Rng rng(seed);
  std::vector<int> group(kNumBehaviors, -1);
  for (std::size_t g = 0; g < opt.confusable.size(); ++g) {
    group[index_of(opt.confusable[g].first)] = static_cast<int>(g);
    group[index_of(opt.confusable[g].second)] = static_cast<int>(g);
  }
  std::vector<LabeledSentence> out;
  for (std::size_t c = 0; c < kNumBehaviors; ++c) {
    for (std::size_t s = 0; s < opt.per_class; ++s) {
      const std::size_t len = opt.min_len + rng.uniform_index(opt.max_len - opt.min_len + 1);
      std::string text;
      for (std::size_t i = 0; i < len; ++i) {
        std::string w;
        if (opt.filler_vocab > 0 && rng.bernoulli(opt.filler_rate)) {
          w = opt.style + "zz" + class_word(25, rng.uniform_index(opt.filler_vocab));
        } else if (group[c] >= 0 && rng.bernoulli(opt.shared_rate)) {
          w = "qq" + class_word(static_cast<std::size_t>(group[c]), rng.uniform_index(opt.vocab));
        } else {
          w = class_word(c, rng.uniform_index(opt.vocab));
        }
        text += (i ? " " : "") + w;
      }
      out.emplace_back(std::move(text), behavior_at(c));
    }
  }
  return out;
}

// Balanced same/different pairs drawn from a labeled corpus.
inline std::vector<SentencePair> balanced_pairs(std::span<const LabeledSentence> sentences, std::size_t n,
                                                std::uint64_t seed) {
  TrainingSetSizes sizes{n / 2, n - n / 2, 0};
  return build_training_sets(sentences, sizes, {}, seed).original;
}

// 13x13 confusion matrix with 100 test sentences per class. Five classes sit
// below 0.7 accuracy with a dominant first and a weaker second confusion;
// every other class is at 0.9 with its errors spread thinly.
inline ConfusionMatrix table3_confusion() {
  using B = BehaviorLabel;
  struct Row {
    B cls;
    int correct;
    B first;
    int n_first;
    B second;
    int n_second;
  };
  const Row weak[] = {
      {B::personal_experience, 60, B::credibility, 20, B::similarity, 12},
      {B::rephrase_preference, 45, B::preference_confirmation, 25, B::personal_opinion, 15},
      {B::self_modeling, 31, B::personal_experience, 30, B::similarity, 20},
      {B::similarity, 53, B::acknowledgment, 22, B::self_modeling, 12},
      {B::transparency, 65, B::opinion_inquiry, 15, B::offer_help, 10},
  };
  ConfusionMatrix cm;
  auto spread = [&](std::size_t r, int rest, std::vector<std::size_t> skip) {
    for (std::size_t c = 0; rest > 0; c = (c + 1) % kNumBehaviors) {
      if (c == r || std::find(skip.begin(), skip.end(), c) != skip.end()) continue;
      ++cm.counts[r][c];
      --rest;
    }
  };
  std::vector<bool> done(kNumBehaviors, false);
  for (const auto& w : weak) {
    const std::size_t r = index_of(w.cls);
    cm.counts[r][r] = static_cast<std::uint64_t>(w.correct);
    cm.counts[r][index_of(w.first)] = static_cast<std::uint64_t>(w.n_first);
    cm.counts[r][index_of(w.second)] = static_cast<std::uint64_t>(w.n_second);
    spread(r, 100 - w.correct - w.n_first - w.n_second, {index_of(w.first), index_of(w.second)});
    done[r] = true;
  }
  for (std::size_t r = 0; r < kNumBehaviors; ++r) {
    if (done[r]) continue;
    cm.counts[r][r] = 90;
    spread(r, 10, {});
  }
  return cm;
}

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("bacrs_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    const auto p = file(name);
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

private:
  std::filesystem::path path_;
};

}  // namespace bacrs::fixtures
