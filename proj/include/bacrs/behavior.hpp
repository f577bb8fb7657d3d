#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "bacrs/error.hpp"

namespace bacrs {

// The 13 recommendation strategies. Enumerators are in lexicographic order of
// their symbolic names, so comparing enumerators compares names.
enum class BehaviorLabel : unsigned char {
  acknowledgment,
  credibility,
  encouragement,
  experience_inquiry,
  offer_help,
  opinion_inquiry,
  personal_experience,
  personal_opinion,
  preference_confirmation,
  rephrase_preference,
  self_modeling,
  similarity,
  transparency,
};

inline constexpr std::size_t kNumBehaviors = 13;

inline constexpr std::array<std::string_view, kNumBehaviors> kBehaviorNames = {
    "acknowledgment",          "credibility",         "encouragement",
    "experience_inquiry",      "offer_help",          "opinion_inquiry",
    "personal_experience",     "personal_opinion",    "preference_confirmation",
    "rephrase_preference",     "self_modeling",       "similarity",
    "transparency",
};

inline constexpr std::array<BehaviorLabel, kNumBehaviors> all_behaviors() {
  std::array<BehaviorLabel, kNumBehaviors> out{};
  for (std::size_t i = 0; i < kNumBehaviors; ++i) out[i] = static_cast<BehaviorLabel>(i);
  return out;
}

inline constexpr std::size_t index_of(BehaviorLabel b) { return static_cast<std::size_t>(b); }

inline constexpr BehaviorLabel behavior_at(std::size_t i) { return static_cast<BehaviorLabel>(i); }

inline constexpr std::string_view to_string(BehaviorLabel b) { return kBehaviorNames[index_of(b)]; }

inline std::optional<BehaviorLabel> try_parse_behavior(std::string_view s) {
  for (std::size_t i = 0; i < kNumBehaviors; ++i)
    if (kBehaviorNames[i] == s) return behavior_at(i);
  return std::nullopt;
}

// Throws data_error naming the offending value.
inline BehaviorLabel parse_behavior(std::string_view s) {
  if (auto b = try_parse_behavior(s)) return *b;
  throw data_error("unknown behavior label \"" + std::string(s) + "\"");
}

}  // namespace bacrs
