#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bacrs/corpus.hpp"
#include "bacrs/error.hpp"
#include "bacrs/hash.hpp"
#include "bacrs/text_metrics.hpp"

namespace bacrs {

struct FeatureConfig {
  int hash_bits = 18;  // per-text block dimension is 2^hash_bits
  int word_ngram_min = 1;
  int word_ngram_max = 2;
  int char_ngram_min = 3;
  int char_ngram_max = 5;
  bool per_side_blocks = true;  // hashed n-grams of each side in pair features

  std::size_t block_dim() const { return std::size_t{1} << hash_bits; }
  std::size_t word_orders() const { return static_cast<std::size_t>(word_ngram_max - word_ngram_min + 1); }

  std::string canonical() const {
    return "hash_bits=" + std::to_string(hash_bits) + ";word=" + std::to_string(word_ngram_min) + "-" +
           std::to_string(word_ngram_max) + ";char=" + std::to_string(char_ngram_min) + "-" +
           std::to_string(char_ngram_max) + ";per_side=" + (per_side_blocks ? "1" : "0");
  }

  std::string fingerprint() const { return hex64(fnv1a(canonical())); }

  void validate() const {
    if (hash_bits < 1 || hash_bits > 26) throw usage_error("hash_bits must be in [1, 26]");
    if (word_ngram_min < 1 || word_ngram_max < word_ngram_min) throw usage_error("invalid word n-gram range");
    if (char_ngram_min < 1 || char_ngram_max < char_ngram_min) throw usage_error("invalid char n-gram range");
  }

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

inline constexpr std::size_t kJaccardBins = 10;

// Sorted by index, no duplicate indices.
struct FeatureVector {
  std::size_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  double value(std::uint32_t index) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), index,
                               [](const auto& e, std::uint32_t i) { return e.first < i; });
    return (it != entries.end() && it->first == index) ? it->second : 0.0;
  }
};

// Layout of pair features: [side A | side B | shared n-gram counts | Jaccard bins].
struct PairLayout {
  std::size_t block;
  std::size_t orders;

  explicit PairLayout(const FeatureConfig& c) : block(c.block_dim()), orders(c.word_orders()) {}

  std::size_t side_a() const { return 0; }
  std::size_t side_b() const { return block; }
  std::size_t shared(std::size_t order_offset) const { return 2 * block + order_offset; }
  std::size_t jaccard_bin(std::size_t bin) const { return 2 * block + orders + (bin - 1); }  // bin in 1..10
  std::size_t interaction_begin() const { return 2 * block; }
  std::size_t dim() const { return 2 * block + orders + kJaccardBins; }
};

inline std::size_t pair_feature_dim(const FeatureConfig& c) { return PairLayout(c).dim(); }

namespace detail {

using Entries = std::vector<std::pair<std::uint32_t, double>>;

inline void canonicalize(Entries& e) {
  std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (out > 0 && e[out - 1].first == e[i].first) {
      e[out - 1].second += e[i].second;
    } else {
      e[out++] = e[i];
    }
  }
  e.resize(out);
}

inline void l2_normalize(std::span<std::pair<std::uint32_t, double>> e) {
  double ss = 0.0;
  for (const auto& x : e) ss += x.second * x.second;
  if (ss <= 0.0) return;
  const double inv = 1.0 / std::sqrt(ss);
  for (auto& x : e) x.second *= inv;
}

inline std::uint32_t bucket(std::string_view kind, std::string_view gram, std::size_t dim) {
  return static_cast<std::uint32_t>(fnv1a(gram, fnv1a(kind)) & (dim - 1));
}

inline std::set<std::string> word_ngram_set(const TokenSequence& tokens, int n) {
  std::set<std::string> s;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= tokens.size(); ++i)
    s.insert(join_ngram(std::span<const std::string>(tokens).subspan(i, un)));
  return s;
}

}  // namespace detail

// Hashed word and character n-gram counts of one text, L2-normalized, over
// [0, 2^hash_bits).
inline FeatureVector featurize_tokens(const TokenSequence& tokens, const FeatureConfig& config) {
  const std::size_t dim = config.block_dim();
  FeatureVector fv;
  fv.dim = dim;
  for (int n = config.word_ngram_min; n <= config.word_ngram_max; ++n) {
    const auto un = static_cast<std::size_t>(n);
    const std::string kind = "w" + std::to_string(n);
    for (std::size_t i = 0; i + un <= tokens.size(); ++i)
      fv.entries.emplace_back(
          detail::bucket(kind, detail::join_ngram(std::span<const std::string>(tokens).subspan(i, un)), dim), 1.0);
  }
  if (!tokens.empty()) {
    std::string joined = " ";
    for (const auto& t : tokens) joined += t + " ";
    const auto cps = utf8::decode(joined);
    for (int n = config.char_ngram_min; n <= config.char_ngram_max; ++n) {
      const auto un = static_cast<std::size_t>(n);
      const std::string kind = "c" + std::to_string(n);
      for (std::size_t i = 0; i + un <= cps.size(); ++i) {
        std::string gram;
        for (std::size_t k = i; k < i + un; ++k) utf8::append(gram, cps[k]);
        fv.entries.emplace_back(detail::bucket(kind, gram, dim), 1.0);
      }
    }
  }
  detail::canonicalize(fv.entries);
  detail::l2_normalize(fv.entries);
  return fv;
}

inline FeatureVector featurize_text(std::string_view text, const FeatureConfig& config) {
  if (detail::is_blank(text)) throw data_error("cannot featurize an empty text");
  return featurize_tokens(tokenize(text), config);
}

inline double token_jaccard(const TokenSequence& a, const TokenSequence& b) {
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Bins 1..10 over [0, 1]; bin 10 holds [0.9, 1].
inline std::size_t jaccard_bin(double j) {
  return std::min<std::size_t>(kJaccardBins, static_cast<std::size_t>(std::floor(j * kJaccardBins)) + 1);
}

// Side blocks carry each text's hashed n-grams (L2-normalized per block). The
// interaction block holds the number of shared distinct word n-grams per
// order (L2-normalized as a group) and a one-hot token-Jaccard bin of weight 1.
inline FeatureVector featurize_pair(std::string_view text_a, std::string_view text_b, const FeatureConfig& config) {
  if (detail::is_blank(text_a) || detail::is_blank(text_b)) throw data_error("cannot featurize an empty text");
  const PairLayout layout(config);
  const auto ta = tokenize(text_a);
  const auto tb = tokenize(text_b);
  FeatureVector fv;
  fv.dim = layout.dim();
  if (config.per_side_blocks) {
    for (const auto& [i, v] : featurize_tokens(ta, config).entries)
      fv.entries.emplace_back(static_cast<std::uint32_t>(layout.side_a() + i), v);
    for (const auto& [i, v] : featurize_tokens(tb, config).entries)
      fv.entries.emplace_back(static_cast<std::uint32_t>(layout.side_b() + i), v);
  }
  const std::size_t shared_begin = fv.entries.size();
  for (int n = config.word_ngram_min; n <= config.word_ngram_max; ++n) {
    const auto sa = detail::word_ngram_set(ta, n);
    const auto sb = detail::word_ngram_set(tb, n);
    std::size_t shared = 0;
    for (const auto& g : sa) shared += sb.count(g);
    if (shared > 0)
      fv.entries.emplace_back(static_cast<std::uint32_t>(layout.shared(static_cast<std::size_t>(n - config.word_ngram_min))),
                              static_cast<double>(shared));
  }
  detail::l2_normalize(std::span(fv.entries).subspan(shared_begin));
  fv.entries.emplace_back(static_cast<std::uint32_t>(layout.jaccard_bin(jaccard_bin(token_jaccard(ta, tb)))), 1.0);
  return fv;
}

}  // namespace bacrs
