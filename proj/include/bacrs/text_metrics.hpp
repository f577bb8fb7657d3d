#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bacrs/error.hpp"

namespace bacrs {

using TokenSequence = std::vector<std::string>;

namespace utf8 {

// Decodes UTF-8; invalid bytes decode to U+FFFD one byte at a time.
inline std::vector<char32_t> decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    }
    bool ok = len > 0 && i + static_cast<std::size_t>(len) <= s.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((cc & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline bool is_space(char32_t c) {
  return c == ' ' || (c >= 0x09 && c <= 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200B) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
         c == 0x3000 || c == 0xFEFF;
}

// ASCII punctuation plus the Latin-1, General Punctuation, CJK and fullwidth
// punctuation blocks.
inline bool is_punct(char32_t c) {
  if (c < 0x80) return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
                       (c >= 0x7B && c <= 0x7E);
  return (c >= 0xA1 && c <= 0xBF && c != 0xAA && c != 0xB2 && c != 0xB3 && c != 0xB5 && c != 0xB9 &&
          c != 0xBA && !(c >= 0xBC && c <= 0xBE)) ||
         c == 0xD7 || c == 0xF7 || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) || (c >= 0xFF01 && c <= 0xFF0F) ||
         (c >= 0xFF1A && c <= 0xFF20) || c == 0xFFFD;
}

// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
inline char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if ((c >= 0xC0 && c <= 0xDE && c != 0xD7)) return c + 32;
  if (c == 0x178) return 0xFF;
  if (c >= 0x100 && c <= 0x17F && c != 0x130 && c != 0x138 && c != 0x149 && c != 0x17F) {
    const bool odd_lower = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
    if (odd_lower) return (c % 2 == 1) ? c + 1 : c;
    return (c % 2 == 0) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

}  // namespace utf8

// Lowercases and splits on whitespace and punctuation; punctuation is
// dropped, digits are kept.
inline TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  std::string current;
  for (char32_t cp : utf8::decode(text)) {
    if (utf8::is_space(cp) || utf8::is_punct(cp)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      continue;
    }
    utf8::append(current, utf8::to_lower(cp));
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

namespace detail {

inline std::string join_ngram(std::span<const std::string> tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += '\x1f';
    s += tokens[i];
  }
  return s;
}

inline std::map<std::string, int> ngram_counts(const TokenSequence& tokens, std::size_t n) {
  std::map<std::string, int> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[join_ngram(std::span<const std::string>(tokens).subspan(i, n))];
  return counts;
}

}  // namespace detail

// Sentence-level BLEU with add-one smoothing on every order:
//   p_n = (clipped matches + 1) / (candidate n-grams + 1)
// An order with no candidate n-grams therefore contributes (0+1)/(0+1) = 1.
inline double bleu_k(const TokenSequence& candidate, const TokenSequence& reference, int k) {
  if (k < 1) throw usage_error("bleu k must be >= 1");
  if (reference.empty()) throw data_error("bleu reference must be non-empty");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= k; ++n) {
    const auto cand = detail::ngram_counts(candidate, static_cast<std::size_t>(n));
    const auto ref = detail::ngram_counts(reference, static_cast<std::size_t>(n));
    long matches = 0;
    long total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = ref.find(gram);
      if (it != ref.end()) matches += std::min(count, it->second);
    }
    log_sum += std::log(static_cast<double>(matches + 1) / static_cast<double>(total + 1));
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / k);
}

enum class DistScope { corpus, per_response };

inline std::string_view to_string(DistScope s) { return s == DistScope::corpus ? "corpus" : "per_response"; }

// Distinct k-grams over total k-grams. Responses shorter than k have no
// k-grams; in per_response scope they are left out of the average.
inline double dist_k(std::span<const TokenSequence> responses, int k, DistScope scope = DistScope::corpus) {
  if (k < 1) throw usage_error("dist k must be >= 1");
  const auto n = static_cast<std::size_t>(k);
  if (scope == DistScope::corpus) {
    std::set<std::string> distinct;
    std::size_t total = 0;
    for (const auto& r : responses) {
      if (r.size() < n) continue;
      for (std::size_t i = 0; i + n <= r.size(); ++i) {
        distinct.insert(detail::join_ngram(std::span<const std::string>(r).subspan(i, n)));
        ++total;
      }
    }
    return total == 0 ? 0.0 : static_cast<double>(distinct.size()) / static_cast<double>(total);
  }
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& r : responses) {
    if (r.size() < n) continue;
    sum += dist_k(std::span<const TokenSequence>(&r, 1), k, DistScope::corpus);
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

inline double dist_k(const TokenSequence& response, int k) {
  return dist_k(std::span<const TokenSequence>(&response, 1), k, DistScope::corpus);
}

}  // namespace bacrs
