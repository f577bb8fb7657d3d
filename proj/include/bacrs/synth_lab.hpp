#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bacrs/agreement.hpp"
#include "bacrs/behavior_metrics.hpp"
#include "bacrs/corpus.hpp"
#include "bacrs/error.hpp"
#include "bacrs/random.hpp"
#include "bacrs/text_metrics.hpp"

namespace bacrs {

// One annotated generation pair: the human-preferred response, the other
// one, and the human reference for the same context.
struct PoolItem {
  std::string instance_id;
  SystemResponse reference;
  SystemResponse chosen;
  SystemResponse rejected;
};

using PreferencePairPool = std::vector<PoolItem>;

inline void validate_pool(std::span<const PoolItem> pool) {
  std::set<std::string_view> ids;
  for (const auto& item : pool) {
    if (!ids.insert(item.instance_id).second) throw data_error("duplicate pool instance \"" + item.instance_id + "\"");
    if (item.chosen == item.rejected)
      throw data_error("pool item \"" + item.instance_id + "\" has identical chosen and rejected responses");
  }
}

// Pool from human preference judgments: first non-tie judgment per scored
// instance, then a seeded sample of `pool_size` items (all when fewer exist).
inline PreferencePairPool build_pool(std::span<const EvalInstance> instances, std::span<const PreferenceJudgment> prefs,
                                     std::size_t pool_size, std::uint64_t seed) {
  std::map<std::string_view, const EvalInstance*> index;
  for (const auto& inst : instances) index.emplace(inst.instance_id, &inst);
  PreferencePairPool all;
  std::set<std::string_view> taken;
  for (const auto& p : prefs) {
    if (p.verdict == Verdict::same) continue;
    auto it = index.find(p.instance_id);
    if (it == index.end()) throw data_error("preference references unknown instance \"" + p.instance_id + "\"");
    const EvalInstance& inst = *it->second;
    if (!inst.scored() || !taken.insert(inst.instance_id).second) continue;
    const auto& win = p.verdict == Verdict::a_better ? p.system_a : p.system_b;
    const auto& lose = p.verdict == Verdict::a_better ? p.system_b : p.system_a;
    auto w = inst.system_responses.find(win);
    auto l = inst.system_responses.find(lose);
    if (w == inst.system_responses.end() || l == inst.system_responses.end())
      throw data_error("instance \"" + inst.instance_id + "\" lacks a response for a judged system");
    if (w->second == l->second) continue;
    all.push_back({inst.instance_id, {inst.human_text, inst.human_behavior}, w->second, l->second});
  }
  if (all.size() > pool_size) {
    Rng rng(seed);
    rng.shuffle(std::span<PoolItem>(all));
    all.resize(pool_size);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
  }
  return all;
}

// round(p * |pool|) items, sampled without replacement, take the chosen
// response; the rest take the rejected one.
inline std::map<std::string, SystemResponse> build_synthetic_system(std::span<const PoolItem> pool, double p,
                                                                    std::uint64_t seed) {
  if (pool.empty()) throw data_error("synthetic system needs a non-empty pool");
  if (!(p >= 0.0 && p <= 1.0)) throw usage_error("blend ratio must be in [0, 1]");
  const std::size_t n = pool.size();
  const auto m = static_cast<std::size_t>(std::llround(p * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t k = 0; k < m; ++k) std::swap(idx[k], idx[k + rng.uniform_index(n - k)]);
  std::vector<char> chosen(n, 0);
  for (std::size_t k = 0; k < m; ++k) chosen[idx[k]] = 1;
  std::map<std::string, SystemResponse> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace(pool[i].instance_id, chosen[i] ? pool[i].chosen : pool[i].rejected);
  return out;
}

struct CurveRow {
  double p = 0.0;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

using DifferentiationCurve = std::vector<CurveRow>;

struct SynthParams {
  int bleu_k = 2;
  int dist_k = 2;
  DistScope dist_scope = DistScope::corpus;
};

// 0.0, 0.1, ..., 1.0 computed as i/10 so that each value is the double
// nearest to the decimal ratio.
inline std::vector<double> default_blend_ratios() {
  std::vector<double> ps;
  for (int i = 0; i <= 10; ++i) ps.push_back(i / 10.0);
  return ps;
}

inline std::uint64_t blend_seed(std::uint64_t seed, double p) {
  return derive_seed(seed, static_cast<std::uint64_t>(std::llround(p * 1e6)));
}

inline double evaluate_synthetic(std::span<const PoolItem> pool, const std::map<std::string, SystemResponse>& system,
                                 MetricKind metric, const SynthParams& params) {
  switch (metric) {
    case MetricKind::ba: {
      long matches = 0;
      for (const auto& item : pool) {
        const auto& r = system.at(item.instance_id);
        matches += ba_pair(*r.behavior, *item.reference.behavior);
      }
      return static_cast<double>(matches) / static_cast<double>(pool.size());
    }
    case MetricKind::bleu: {
      double sum = 0.0;
      for (const auto& item : pool)
        sum += bleu_k(tokenize(system.at(item.instance_id).text), tokenize(item.reference.text), params.bleu_k);
      return sum / static_cast<double>(pool.size());
    }
    case MetricKind::dist: {
      std::vector<TokenSequence> toks;
      toks.reserve(pool.size());
      for (const auto& item : pool) toks.push_back(tokenize(system.at(item.instance_id).text));
      return dist_k(toks, params.dist_k, params.dist_scope);
    }
  }
  return 0.0;
}

inline void check_prerequisites(std::span<const PoolItem> pool, MetricKind metric) {
  for (const auto& item : pool) {
    if (metric == MetricKind::ba) {
      if (!item.reference.behavior)
        throw data_error("metric ba: missing field reference.behavior at \"" + item.instance_id + "\"");
      if (!item.chosen.behavior || !item.rejected.behavior)
        throw data_error("metric ba: missing field response behavior at \"" + item.instance_id + "\"");
    } else if (metric == MetricKind::bleu) {
      if (tokenize(item.reference.text).empty())
        throw data_error("metric bleu: missing field reference.text at \"" + item.instance_id + "\"");
    }
  }
}

// Rows are ordered by p ascending, then by the order of `metrics`.
inline DifferentiationCurve differentiation_experiment(std::span<const PoolItem> pool, std::span<const MetricKind> metrics,
                                                       std::vector<double> ps, std::uint64_t seed,
                                                       const SynthParams& params = {}) {
  if (pool.empty()) throw data_error("differentiation experiment needs a non-empty pool");
  validate_pool(pool);
  for (auto m : metrics) check_prerequisites(pool, m);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  DifferentiationCurve curve;
  for (double p : ps) {
    const auto system = build_synthetic_system(pool, p, blend_seed(seed, p));
    for (auto m : metrics) curve.push_back({p, std::string(to_string(m)), evaluate_synthetic(pool, system, m, params), seed});
  }
  return curve;
}

namespace detail {

// Average ranks (1-based) with ties sharing the mean rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

struct SpearmanResult {
  double rho = 0.0;
  bool degenerate = false;  // constant values; rho reported as 0
};

inline SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw data_error("spearman: mismatched or empty inputs");
  const auto rx = detail::average_ranks(x);
  const auto ry = detail::average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

// Spearman correlation between blend ratio and metric value.
inline SpearmanResult monotonicity(const DifferentiationCurve& curve, std::string_view metric,
                                   std::vector<std::string>* warnings = nullptr) {
  std::vector<double> ps;
  std::vector<double> values;
  std::set<double> distinct;
  for (const auto& row : curve) {
    if (row.metric != metric) continue;
    ps.push_back(row.p);
    values.push_back(row.value);
    distinct.insert(row.p);
  }
  if (distinct.size() < 3)
    throw data_error("monotonicity of " + std::string(metric) + " needs at least 3 distinct blend ratios");
  auto r = spearman(ps, values);
  if (r.degenerate && warnings)
    warnings->push_back("metric " + std::string(metric) + " is constant across blend ratios; rho set to 0");
  return r;
}

}  // namespace bacrs
