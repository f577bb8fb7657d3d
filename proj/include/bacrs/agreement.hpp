#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "bacrs/behavior_metrics.hpp"
#include "bacrs/corpus.hpp"
#include "bacrs/error.hpp"
#include "bacrs/random.hpp"
#include "bacrs/text_metrics.hpp"

namespace bacrs {

inline Verdict derive_preference(double score_a, double score_b, double tie_eps = 0.0) {
  if (score_a > score_b + tie_eps) return Verdict::a_better;
  if (score_b > score_a + tie_eps) return Verdict::b_better;
  return Verdict::same;
}

// Cohen's kappa, or nullopt when chance agreement is 1 (both raters constant
// on the same label), where the ratio is 0/0.
template <class T>
std::optional<double> try_cohens_kappa(std::span<const T> x, std::span<const T> y) {
  if (x.size() != y.size()) throw data_error("kappa: sequences differ in length");
  if (x.empty()) throw data_error("kappa: empty input");
  std::map<T, std::pair<std::uint64_t, std::uint64_t>> marginals;
  std::uint64_t agree = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++marginals[x[i]].first;
    ++marginals[y[i]].second;
    if (x[i] == y[i]) ++agree;
  }
  const auto n = static_cast<std::uint64_t>(x.size());
  std::uint64_t chance = 0;
  for (const auto& [label, m] : marginals) chance += m.first * m.second;
  const double p_o = static_cast<double>(agree) / static_cast<double>(n);
  const double p_e = static_cast<double>(chance) / (static_cast<double>(n) * static_cast<double>(n));
  if (chance == n * n) return std::nullopt;
  return (p_o - p_e) / (1.0 - p_e);
}

// (p_o - p_e) / (1 - p_e); 1.0 when both raters are constant and identical.
template <class T>
double cohens_kappa(std::span<const T> x, std::span<const T> y) {
  return try_cohens_kappa(x, y).value_or(1.0);
}

template <class T>
double cohens_kappa(const std::vector<T>& x, const std::vector<T>& y) {
  return cohens_kappa(std::span<const T>(x), std::span<const T>(y));
}

// Empirical quantile with linear interpolation between order statistics
// (position (n-1)q in the sorted sample).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw numeric_error("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || lo == hi) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct BootstrapOptions {
  int b = 1000;
  std::uint64_t seed = 42;
  double q_low = 0.025;
  double q_high = 0.975;
  int max_redraws = 100;  // per resample, for statistics undefined on a draw
  unsigned threads = 1;
};

// Percentile bootstrap. Resample i draws from its own RNG stream
// derive_seed(seed, i), so the result does not depend on `threads`.
// `stat` maps a resample to double, or to optional<double> where nullopt
// means undefined on that draw (the draw is repeated).
template <class Item, class Stat>
std::pair<double, double> bootstrap_ci(std::span<const Item> items, Stat&& stat, const BootstrapOptions& opt = {}) {
  if (opt.b < 1) throw usage_error("bootstrap b must be >= 1");
  if (items.empty()) throw data_error("bootstrap: no items");
  if (!(opt.q_low >= 0.0 && opt.q_low <= opt.q_high && opt.q_high <= 1.0))
    throw usage_error("bootstrap quantiles must satisfy 0 <= low <= high <= 1");

  const std::size_t n = items.size();
  std::vector<double> values(static_cast<std::size_t>(opt.b));
  auto run_range = [&](std::size_t begin, std::size_t end) {
    std::vector<Item> sample(n);
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(derive_seed(opt.seed, i));
      for (int attempt = 0;; ++attempt) {
        if (attempt > opt.max_redraws)
          throw numeric_error("bootstrap: statistic undefined on " + std::to_string(opt.max_redraws + 1) +
                              " consecutive resamples");
        for (auto& s : sample) s = items[rng.uniform_index(n)];
        using R = std::invoke_result_t<Stat&, std::span<const Item>>;
        if constexpr (std::is_arithmetic_v<R>) {
          values[i] = static_cast<double>(stat(std::span<const Item>(sample)));
          break;
        } else {
          auto v = stat(std::span<const Item>(sample));
          if (!v) continue;
          values[i] = *v;
          break;
        }
      }
    }
  };

  const std::size_t total = values.size();
  const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(total)));
  if (threads == 1) {
    run_range(0, total);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = total * t / threads;
        const std::size_t end = total * (t + 1) / threads;
        pool.emplace_back([&, t, begin, end] {
          try {
            run_range(begin, end);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::sort(values.begin(), values.end());
  return {quantile_sorted(values, opt.q_low), quantile_sorted(values, opt.q_high)};
}

template <class Item, class Stat>
std::pair<double, double> bootstrap_ci(const std::vector<Item>& items, Stat&& stat, const BootstrapOptions& opt = {}) {
  return bootstrap_ci(std::span<const Item>(items), std::forward<Stat>(stat), opt);
}

enum class MetricKind { ba, bleu, dist };

inline std::string_view to_string(MetricKind m) {
  switch (m) {
    case MetricKind::ba: return "ba";
    case MetricKind::bleu: return "bleu";
    case MetricKind::dist: return "dist";
  }
  return "ba";
}

inline MetricKind parse_metric_kind(std::string_view s) {
  if (s == "ba") return MetricKind::ba;
  if (s == "bleu") return MetricKind::bleu;
  if (s == "dist") return MetricKind::dist;
  throw usage_error("unknown metric \"" + std::string(s) + "\" (expected ba|bleu|dist)");
}

struct MetricParams {
  int bleu_k = 2;
  int dist_k = 2;
  std::optional<double> tie_eps;  // unset: 0 for ba, 1e-9 for text metrics
};

inline double default_tie_eps(MetricKind m) { return m == MetricKind::ba ? 0.0 : 1e-9; }

// Per-instance score of one system response. BA is the 0/1 match against the
// human behavior, BLEU is scored against the human text and DIST is the
// per-response distinct ratio.
inline double instance_score(const EvalInstance& inst, std::string_view system, MetricKind metric,
                             const MetricParams& params) {
  auto it = inst.system_responses.find(std::string(system));
  if (it == inst.system_responses.end())
    throw data_error("instance \"" + inst.instance_id + "\" has no response from system \"" + std::string(system) + "\"");
  const SystemResponse& resp = it->second;
  switch (metric) {
    case MetricKind::ba:
      if (!resp.behavior || !inst.human_behavior)
        throw data_error("ba: missing behavior label at instance \"" + inst.instance_id + "\"");
      return ba_pair(*resp.behavior, *inst.human_behavior);
    case MetricKind::bleu: {
      const auto ref = tokenize(inst.human_text);
      if (ref.empty()) throw data_error("bleu: human reference has no tokens at \"" + inst.instance_id + "\"");
      return bleu_k(tokenize(resp.text), ref, params.bleu_k);
    }
    case MetricKind::dist:
      return dist_k(tokenize(resp.text), params.dist_k);
  }
  return 0.0;
}

struct AgreementItem {
  std::string instance_id;
  Verdict metric_verdict = Verdict::same;
  Verdict human_verdict = Verdict::same;
};

struct AgreementResult {
  std::string metric;
  double kappa = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_items = 0;
  int bootstrap_b = 0;
  std::uint64_t seed = 0;
  bool constant_raters = false;  // both sides gave one identical verdict throughout
  std::vector<AgreementItem> items;
};

inline std::vector<AgreementItem> agreement_items(std::span<const EvalInstance> instances,
                                                  std::span<const PreferenceJudgment> prefs, MetricKind metric,
                                                  const MetricParams& params) {
  std::map<std::string_view, const EvalInstance*> index;
  for (const auto& inst : instances) index.emplace(inst.instance_id, &inst);
  const double eps = params.tie_eps.value_or(default_tie_eps(metric));
  if (eps < 0.0) throw usage_error("tie_eps must be >= 0");
  std::vector<AgreementItem> items;
  items.reserve(prefs.size());
  for (const auto& p : prefs) {
    auto it = index.find(p.instance_id);
    if (it == index.end()) throw data_error("preference references unknown instance \"" + p.instance_id + "\"");
    const double a = instance_score(*it->second, p.system_a, metric, params);
    const double b = instance_score(*it->second, p.system_b, metric, params);
    items.push_back({p.instance_id, derive_preference(a, b, eps), p.verdict});
  }
  return items;
}

// Three-category kappa (a_better / b_better / same) between metric-derived
// and human verdicts, with a percentile bootstrap over judgments.
inline AgreementResult agreement(std::span<const EvalInstance> instances, std::span<const PreferenceJudgment> prefs,
                                 MetricKind metric, const MetricParams& params, const BootstrapOptions& boot) {
  AgreementResult r;
  r.metric = std::string(to_string(metric));
  r.items = agreement_items(instances, prefs, metric, params);
  if (r.items.empty()) throw data_error("agreement: no preference judgments");
  auto kappa_of = [](std::span<const AgreementItem> s) {
    std::vector<Verdict> x;
    std::vector<Verdict> y;
    x.reserve(s.size());
    y.reserve(s.size());
    for (const auto& it : s) {
      x.push_back(it.metric_verdict);
      y.push_back(it.human_verdict);
    }
    return try_cohens_kappa(std::span<const Verdict>(x), std::span<const Verdict>(y));
  };
  const auto point = kappa_of(r.items);
  if (point) {
    r.kappa = *point;
    std::tie(r.ci_low, r.ci_high) = bootstrap_ci(std::span<const AgreementItem>(r.items), kappa_of, boot);
  } else {
    // every resample is constant too, so there is nothing to bootstrap
    r.constant_raters = true;
    r.kappa = r.ci_low = r.ci_high = 1.0;
  }
  r.n_items = r.items.size();
  r.bootstrap_b = boot.b;
  r.seed = boot.seed;
  return r;
}

}  // namespace bacrs
