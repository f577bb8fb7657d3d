#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bacrs/behavior.hpp"
#include "bacrs/corpus.hpp"
#include "bacrs/error.hpp"

namespace bacrs {

enum class NormalizationMode {
  scored_turns,   // divide by the number of scored turns; perfect alignment is 1.0
  paper_literal,  // sum over turns 2..N, divide by N (first turns count in the denominator)
};

inline std::string_view to_string(NormalizationMode m) {
  return m == NormalizationMode::scored_turns ? "scored_turns" : "paper_literal";
}

inline NormalizationMode parse_normalization_mode(std::string_view s) {
  if (s == "scored_turns") return NormalizationMode::scored_turns;
  if (s == "paper_literal") return NormalizationMode::paper_literal;
  throw usage_error("unknown normalization mode \"" + std::string(s) + "\"");
}

struct AlignmentEntry {
  std::string instance_id;
  int ba = 0;
  double weight = 0.0;
  bool scored = false;  // false for first-turn instances; those carry ba 0
};

struct AlignmentReport {
  std::string system;
  std::vector<AlignmentEntry> per_instance;
  double aggregate = 0.0;
  NormalizationMode normalization_mode = NormalizationMode::scored_turns;
  std::size_t n_scored = 0;
  std::size_t n_excluded = 0;  // first-turn instances
};

// Weighted mean recomputed from the entries.
inline double recompute_aggregate(const AlignmentReport& r) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& e : r.per_instance) {
    num += e.weight * e.ba;
    den += e.weight;
  }
  return den > 0.0 ? num / den : 0.0;
}

inline constexpr int ba_pair(BehaviorLabel system, BehaviorLabel human) { return system == human ? 1 : 0; }

namespace detail {

inline std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
  return s;
}

// Scores every scored instance with `score(inst) -> int` and aggregates per
// the normalization mode. `score` returns -1 when the instance cannot be
// scored; those ids are collected into a single error.
template <class ScoreFn>
AlignmentReport assemble_report(std::span<const EvalInstance> instances, std::string_view system, NormalizationMode mode,
                                ScoreFn&& score, std::string_view missing_what) {
  AlignmentReport report;
  report.system = std::string(system);
  report.normalization_mode = mode;
  std::vector<std::string> missing;
  long matches = 0;
  for (const auto& inst : instances) {
    if (!inst.scored()) {
      ++report.n_excluded;
      report.per_instance.push_back({inst.instance_id, 0, mode == NormalizationMode::paper_literal ? 1.0 : 0.0, false});
      continue;
    }
    const int ba = score(inst);
    if (ba < 0) {
      missing.push_back(inst.instance_id);
      continue;
    }
    ++report.n_scored;
    matches += ba;
    report.per_instance.push_back({inst.instance_id, ba, 1.0, true});
  }
  if (!missing.empty())
    throw data_error(std::string(missing_what) + " for system \"" + std::string(system) + "\": " + join_ids(missing));
  if (report.n_scored == 0) throw data_error("no scored instances (every instance has turn_index 1)");
  const std::size_t denom =
      mode == NormalizationMode::scored_turns ? report.n_scored : report.n_scored + report.n_excluded;
  report.aggregate = static_cast<double>(matches) / static_cast<double>(denom);
  return report;
}

inline std::optional<BehaviorLabel> system_behavior(const EvalInstance& inst, std::string_view system) {
  auto it = inst.system_responses.find(std::string(system));
  if (it == inst.system_responses.end()) return std::nullopt;
  return it->second.behavior;
}

}  // namespace detail

// Fraction of scored turns whose system behavior equals the human behavior.
// Instances with turn_index 1 are never scored.
inline AlignmentReport behavior_alignment(std::span<const EvalInstance> instances, std::string_view system,
                                          NormalizationMode mode = NormalizationMode::scored_turns) {
  return detail::assemble_report(
      instances, system, mode,
      [&](const EvalInstance& inst) {
        auto sys = detail::system_behavior(inst, system);
        if (!sys || !inst.human_behavior) return -1;
        return ba_pair(*sys, *inst.human_behavior);
      },
      "missing behavior labels");
}

// Order-t Markov model over recommender behavior sequences.
struct BehaviorMarkovModel {
  using History = std::vector<BehaviorLabel>;
  using Counts = std::array<std::uint64_t, kNumBehaviors>;

  int order_t = 1;
  double smoothing_alpha = 1.0;
  std::map<History, Counts> counts;

  const Counts* find(const History& h) const {
    auto it = counts.find(h);
    return it == counts.end() ? nullptr : &it->second;
  }
};

// Runs of consecutive labeled recommender behaviors; an unlabeled recommender
// turn ends a run.
inline std::vector<std::vector<BehaviorLabel>> recommender_behavior_runs(const std::vector<Turn>& turns) {
  std::vector<std::vector<BehaviorLabel>> runs(1);
  for (const auto& t : turns) {
    if (t.speaker != Speaker::recommender) continue;
    if (t.behavior) {
      runs.back().push_back(*t.behavior);
    } else if (!runs.back().empty()) {
      runs.emplace_back();
    }
  }
  if (runs.back().empty()) runs.pop_back();
  return runs;
}

inline BehaviorMarkovModel fit_markov(std::span<const Dialogue> dialogues, int order_t, double alpha) {
  if (order_t < 1) throw usage_error("markov order must be >= 1");
  if (!(alpha >= 0.0)) throw usage_error("smoothing alpha must be >= 0");
  BehaviorMarkovModel model;
  model.order_t = order_t;
  model.smoothing_alpha = alpha;
  bool any_label = false;
  for (const auto& d : dialogues) {
    for (const auto& run : recommender_behavior_runs(d.turns)) {
      any_label = true;
      for (std::size_t i = 1; i < run.size(); ++i) {
        const std::size_t start = i > static_cast<std::size_t>(order_t) ? i - static_cast<std::size_t>(order_t) : 0;
        BehaviorMarkovModel::History h(run.begin() + static_cast<std::ptrdiff_t>(start),
                                       run.begin() + static_cast<std::ptrdiff_t>(i));
        auto [it, fresh] = model.counts.try_emplace(std::move(h));
        if (fresh) it->second.fill(0);
        ++it->second[index_of(run[i])];
      }
    }
  }
  if (!any_label) throw data_error("no labeled recommender turns to fit a behavior model");
  return model;
}

// Add-alpha smoothed P(next | history).
inline std::array<double, kNumBehaviors> conditional_distribution(const BehaviorMarkovModel& model,
                                                                  const BehaviorMarkovModel::History& history) {
  if (history.size() > static_cast<std::size_t>(model.order_t))
    throw usage_error("history longer than the model order");
  const auto* counts = model.find(history);
  std::uint64_t total = 0;
  if (counts)
    for (auto c : *counts) total += c;
  const double alpha = model.smoothing_alpha;
  if (total == 0 && alpha == 0.0) throw numeric_error("conditional distribution undefined: unseen history and alpha = 0");
  const double denom = static_cast<double>(total) + alpha * static_cast<double>(kNumBehaviors);
  std::array<double, kNumBehaviors> p{};
  for (std::size_t i = 0; i < kNumBehaviors; ++i)
    p[i] = ((counts ? static_cast<double>((*counts)[i]) : 0.0) + alpha) / denom;
  return p;
}

// Shannon entropy in bits of the smoothed next-behavior distribution.
inline double conditional_entropy(const BehaviorMarkovModel& model, const BehaviorMarkovModel::History& history) {
  double h = 0.0;
  for (double p : conditional_distribution(model, history))
    if (p > 0.0) h -= p * std::log2(p);
  return std::max(0.0, h);
}

// Most recent min(t, available) human behaviors before the scored turn.
inline BehaviorMarkovModel::History human_history(const EvalInstance& inst, int order_t) {
  auto runs = recommender_behavior_runs(inst.context);
  // A run only continues up to the scored turn if no unlabeled recommender
  // turn follows it in the context.
  BehaviorMarkovModel::History h;
  if (runs.empty()) return h;
  bool broken = false;
  for (auto it = inst.context.rbegin(); it != inst.context.rend(); ++it) {
    if (it->speaker != Speaker::recommender) continue;
    broken = !it->behavior;
    break;
  }
  if (broken) return h;
  const auto& last = runs.back();
  const std::size_t take = std::min(last.size(), static_cast<std::size_t>(order_t));
  h.assign(last.end() - static_cast<std::ptrdiff_t>(take), last.end());
  return h;
}

inline constexpr double kDefaultHMin = 0.1;

// Entropy-weighted alignment: w_k = 1 / max(H_k, h_min), aggregate =
// sum(w*ba) / sum(w). Weights are rescaled by their maximum before summing so
// constant weights reproduce the unweighted value bit for bit.
inline AlignmentReport weighted_behavior_alignment(std::span<const EvalInstance> instances, std::string_view system,
                                                   const BehaviorMarkovModel& model, double h_min = kDefaultHMin) {
  if (!(h_min > 0.0)) throw usage_error("h_min must be > 0");
  AlignmentReport report = behavior_alignment(instances, system, NormalizationMode::scored_turns);
  double max_w = 0.0;
  std::size_t k = 0;
  for (const auto& inst : instances) {
    auto& entry = report.per_instance[k++];
    if (!entry.scored) continue;
    const double h = conditional_entropy(model, human_history(inst, model.order_t));
    entry.weight = 1.0 / std::max(h, h_min);
    max_w = std::max(max_w, entry.weight);
  }
  double num = 0.0;
  double den = 0.0;
  for (const auto& e : report.per_instance) {
    if (!e.scored) continue;
    const double w = e.weight / max_w;
    num += w * e.ba;
    den += w;
  }
  report.aggregate = num / den;
  return report;
}

// 1-based index, counting recommender turns only, of the first recommender
// turn that makes a recommendation.
inline std::optional<int> turns_before_first_rec(const Dialogue& d) {
  int k = 0;
  for (const auto& t : d.turns) {
    if (t.speaker != Speaker::recommender) continue;
    ++k;
    if (t.is_recommendation) return k;
  }
  return std::nullopt;
}

enum class SuccessDefinition { first, any };

inline std::string_view to_string(SuccessDefinition s) { return s == SuccessDefinition::first ? "first" : "any"; }

inline SuccessDefinition parse_success_definition(std::string_view s) {
  if (s == "first") return SuccessDefinition::first;
  if (s == "any") return SuccessDefinition::any;
  throw usage_error("unknown success definition \"" + std::string(s) + "\" (expected first|any)");
}

struct RecommendationStats {
  std::size_t n_dialogues = 0;
  std::size_t n_recommending = 0;
  std::optional<double> mean_turns_before_rec;  // over recommending dialogues
  std::optional<double> success_rate;           // over recommending dialogues
  std::array<std::size_t, kNumBehaviors> behavior_counts{};
  std::size_t unlabeled_recommender_turns = 0;
};

inline RecommendationStats recommendation_stats(std::span<const Dialogue> dialogues,
                                                SuccessDefinition success = SuccessDefinition::any) {
  RecommendationStats s;
  s.n_dialogues = dialogues.size();
  long turns_sum = 0;
  std::size_t successes = 0;
  for (const auto& d : dialogues) {
    for (const auto& t : d.turns) {
      if (t.speaker != Speaker::recommender) continue;
      if (t.behavior) ++s.behavior_counts[index_of(*t.behavior)];
      else ++s.unlabeled_recommender_turns;
    }
    auto first = turns_before_first_rec(d);
    if (!first) continue;
    ++s.n_recommending;
    turns_sum += *first;
    bool ok = false;
    for (const auto& t : d.turns) {
      if (t.speaker != Speaker::recommender || !t.is_recommendation) continue;
      if (t.accepted.value_or(false)) ok = true;
      if (success == SuccessDefinition::first || ok) break;
    }
    if (ok) ++successes;
  }
  if (s.n_recommending > 0) {
    s.mean_turns_before_rec = static_cast<double>(turns_sum) / static_cast<double>(s.n_recommending);
    s.success_rate = static_cast<double>(successes) / static_cast<double>(s.n_recommending);
  }
  return s;
}

}  // namespace bacrs
