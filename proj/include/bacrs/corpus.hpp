#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bacrs/behavior.hpp"
#include "bacrs/error.hpp"
#include "bacrs/hash.hpp"

namespace bacrs {

enum class Speaker { seeker, recommender };

inline std::string_view to_string(Speaker s) { return s == Speaker::seeker ? "seeker" : "recommender"; }

struct Turn {
  Speaker speaker = Speaker::seeker;
  std::string text;
  std::optional<BehaviorLabel> behavior;
  bool is_recommendation = false;
  std::optional<bool> accepted;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Dialogue {
  std::string dialogue_id;
  std::vector<Turn> turns;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

struct SystemResponse {
  std::string text;
  std::optional<BehaviorLabel> behavior;

  friend bool operator==(const SystemResponse&, const SystemResponse&) = default;
};

// One row of responses.jsonl.
struct ResponseRecord {
  std::string dialogue_id;
  int turn_index = 0;
  std::string system;
  std::string text;
  std::optional<BehaviorLabel> behavior;
};

struct EvalInstance {
  std::string instance_id;
  std::string dialogue_id;
  int turn_index = 0;  // 1-based over all turns of the source dialogue
  std::vector<Turn> context;
  std::string human_text;
  std::optional<BehaviorLabel> human_behavior;
  std::map<std::string, SystemResponse> system_responses;

  bool scored() const { return turn_index >= 2; }

  friend bool operator==(const EvalInstance&, const EvalInstance&) = default;
};

enum class Verdict { a_better, b_better, same };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::a_better: return "a_better";
    case Verdict::b_better: return "b_better";
    case Verdict::same: return "same";
  }
  return "same";
}

struct PreferenceJudgment {
  std::string instance_id;
  std::string system_a;
  std::string system_b;
  Verdict verdict = Verdict::same;
};

enum class PairLabel { same_behavior, different_behavior };
enum class PairSource { original, hard_negative };

inline std::string_view to_string(PairLabel l) {
  return l == PairLabel::same_behavior ? "same_behavior" : "different_behavior";
}
inline std::string_view to_string(PairSource s) { return s == PairSource::original ? "original" : "hard_negative"; }

struct SentencePair {
  std::string text_a;
  std::string text_b;
  PairLabel label = PairLabel::different_behavior;
  PairSource source = PairSource::original;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

inline std::string make_instance_id(std::string_view dialogue_id, int turn_index) {
  return std::string(dialogue_id) + "#" + std::to_string(turn_index);
}

namespace detail {

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; });
}

inline std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

// Field accessors that report the field name and expected type.
class FieldReader {
public:
  FieldReader(const nlohmann::json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) fail("expected a JSON object");
  }

  [[noreturn]] void fail(const std::string& what) const { throw data_error(where_ + what); }

  const nlohmann::json& required(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end()) fail(std::string("missing field \"") + key + "\"");
    return *it;
  }

  std::string string(const char* key) const {
    const auto& v = required(key);
    if (!v.is_string()) fail(std::string("field \"") + key + "\" must be a string");
    return v.get<std::string>();
  }

  std::string nonempty_string(const char* key) const {
    auto s = string(key);
    if (is_blank(s)) fail(std::string("field \"") + key + "\" must be non-empty");
    return s;
  }

  bool boolean(const char* key) const {
    const auto& v = required(key);
    if (!v.is_boolean()) fail(std::string("field \"") + key + "\" must be a boolean");
    return v.get<bool>();
  }

  int integer(const char* key) const {
    const auto& v = required(key);
    if (!v.is_number_integer()) fail(std::string("field \"") + key + "\" must be an integer");
    return v.get<int>();
  }

  std::optional<bool> optional_boolean(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return std::nullopt;
    if (!it->is_boolean()) fail(std::string("field \"") + key + "\" must be a boolean or null");
    return it->get<bool>();
  }

  std::optional<BehaviorLabel> behavior(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) fail(std::string("field \"") + key + "\" must be a string or null");
    auto s = it->get<std::string>();
    auto b = try_parse_behavior(s);
    if (!b) fail("unknown behavior label \"" + s + "\"");
    return b;
  }

  template <class Enum, std::size_t N>
  Enum choice(const char* key, const std::pair<std::string_view, Enum> (&options)[N]) const {
    auto s = string(key);
    for (const auto& [name, value] : options)
      if (name == s) return value;
    fail(std::string("field \"") + key + "\" has invalid value \"" + s + "\"");
  }

private:
  const nlohmann::json& obj_;
  std::string where_;
};

template <class F>
void for_each_json_line(std::string_view content, F&& f) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw data_error(at_line(line_no) + "malformed JSON: " + e.what());
    }
    f(j, line_no);
  }
}

inline nlohmann::json behavior_json(const std::optional<BehaviorLabel>& b) {
  return b ? nlohmann::json(std::string(to_string(*b))) : nlohmann::json(nullptr);
}

}  // namespace detail

inline void validate(const Turn& t) {
  if (detail::is_blank(t.text)) throw data_error("turn text is empty");
  if (t.accepted && !t.is_recommendation) throw data_error("\"accepted\" set on a turn that is not a recommendation");
}

inline Turn turn_from_json(const nlohmann::json& j, const std::string& where) {
  detail::FieldReader r(j, where);
  static constexpr std::pair<std::string_view, Speaker> speakers[] = {{"seeker", Speaker::seeker},
                                                                       {"recommender", Speaker::recommender}};
  Turn t;
  t.speaker = r.choice("speaker", speakers);
  t.text = r.nonempty_string("text");
  t.behavior = r.behavior("behavior");
  t.is_recommendation = r.boolean("is_recommendation");
  t.accepted = r.optional_boolean("accepted");
  if (t.accepted && !t.is_recommendation) r.fail("\"accepted\" set on a turn that is not a recommendation");
  return t;
}

inline nlohmann::json to_json(const Turn& t) {
  nlohmann::json j;
  j["speaker"] = std::string(to_string(t.speaker));
  j["text"] = t.text;
  j["behavior"] = detail::behavior_json(t.behavior);
  j["is_recommendation"] = t.is_recommendation;
  j["accepted"] = t.accepted ? nlohmann::json(*t.accepted) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const Dialogue& d) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : d.turns) turns.push_back(to_json(t));
  return {{"dialogue_id", d.dialogue_id}, {"turns", std::move(turns)}};
}

// Parses dialogues.jsonl content. Errors carry the 1-based line number.
inline std::vector<Dialogue> parse_dialogues_text(std::string_view content) {
  std::vector<Dialogue> out;
  std::set<std::string> seen;
  detail::for_each_json_line(content, [&](const nlohmann::json& j, std::size_t line) {
    const std::string where = detail::at_line(line);
    detail::FieldReader r(j, where);
    Dialogue d;
    d.dialogue_id = r.nonempty_string("dialogue_id");
    const auto& turns = r.required("turns");
    if (!turns.is_array()) r.fail("field \"turns\" must be an array");
    if (turns.empty()) r.fail("dialogue \"" + d.dialogue_id + "\" has no turns");
    for (std::size_t i = 0; i < turns.size(); ++i)
      d.turns.push_back(turn_from_json(turns[i], where + "turn " + std::to_string(i + 1) + ": "));
    if (!seen.insert(d.dialogue_id).second) r.fail("duplicate dialogue_id \"" + d.dialogue_id + "\"");
    out.push_back(std::move(d));
  });
  return out;
}

inline std::vector<Dialogue> parse_dialogues(const std::string& path) {
  try {
    return parse_dialogues_text(read_file(path));
  } catch (const data_error& e) {
    throw data_error(path + ": " + e.what());
  }
}

inline std::string serialize_dialogues(const std::vector<Dialogue>& dialogues) {
  std::string out;
  for (const auto& d : dialogues) {
    out += to_json(d).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<ResponseRecord> parse_responses_text(std::string_view content) {
  std::vector<ResponseRecord> out;
  detail::for_each_json_line(content, [&](const nlohmann::json& j, std::size_t line) {
    detail::FieldReader r(j, detail::at_line(line));
    ResponseRecord rec;
    rec.dialogue_id = r.nonempty_string("dialogue_id");
    rec.turn_index = r.integer("turn_index");
    if (rec.turn_index < 1) r.fail("turn_index must be >= 1");
    rec.system = r.nonempty_string("system");
    rec.text = r.nonempty_string("text");
    rec.behavior = r.behavior("behavior");
    out.push_back(std::move(rec));
  });
  return out;
}

inline std::vector<ResponseRecord> parse_responses(const std::string& path) {
  try {
    return parse_responses_text(read_file(path));
  } catch (const data_error& e) {
    throw data_error(path + ": " + e.what());
  }
}

inline std::string serialize_responses(const std::vector<ResponseRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j{{"dialogue_id", r.dialogue_id},
                     {"turn_index", r.turn_index},
                     {"system", r.system},
                     {"text", r.text},
                     {"behavior", detail::behavior_json(r.behavior)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

// One instance per (dialogue_id, turn_index) key present in the responses,
// ordered by dialogue order and then turn index. The context holds only the
// turns strictly before the scored turn.
inline std::vector<EvalInstance> extract_eval_instances(const std::vector<Dialogue>& dialogues,
                                                        const std::vector<ResponseRecord>& responses) {
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < dialogues.size(); ++i) by_id.emplace(dialogues[i].dialogue_id, i);

  std::map<std::pair<std::size_t, int>, EvalInstance> keyed;
  std::vector<std::string> dangling;
  std::vector<std::string> bad_speaker;
  for (const auto& rec : responses) {
    auto it = by_id.find(rec.dialogue_id);
    const std::string key = make_instance_id(rec.dialogue_id, rec.turn_index);
    if (it == by_id.end() || rec.turn_index < 1 ||
        static_cast<std::size_t>(rec.turn_index) > dialogues[it->second].turns.size()) {
      if (std::find(dangling.begin(), dangling.end(), key) == dangling.end()) dangling.push_back(key);
      continue;
    }
    const Dialogue& d = dialogues[it->second];
    const Turn& turn = d.turns[static_cast<std::size_t>(rec.turn_index - 1)];
    if (turn.speaker != Speaker::recommender) {
      if (std::find(bad_speaker.begin(), bad_speaker.end(), key) == bad_speaker.end()) bad_speaker.push_back(key);
      continue;
    }
    auto [slot, fresh] = keyed.try_emplace({it->second, rec.turn_index});
    EvalInstance& inst = slot->second;
    if (fresh) {
      inst.instance_id = key;
      inst.dialogue_id = d.dialogue_id;
      inst.turn_index = rec.turn_index;
      inst.context.assign(d.turns.begin(), d.turns.begin() + (rec.turn_index - 1));
      inst.human_text = turn.text;
      inst.human_behavior = turn.behavior;
    }
    if (!inst.system_responses.emplace(rec.system, SystemResponse{rec.text, rec.behavior}).second)
      throw data_error("duplicate response for system \"" + rec.system + "\" at " + key);
  }

  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!dangling.empty()) throw data_error("responses reference unknown dialogue turns: " + join(dangling));
  if (!bad_speaker.empty()) throw data_error("responses keyed to seeker turns: " + join(bad_speaker));

  std::vector<EvalInstance> out;
  out.reserve(keyed.size());
  for (auto& [key, inst] : keyed) out.push_back(std::move(inst));
  return out;
}

inline std::vector<EvalInstance> extract_eval_instances(const std::vector<Dialogue>& dialogues,
                                                        const std::string& responses_path) {
  return extract_eval_instances(dialogues, parse_responses(responses_path));
}

inline std::vector<PreferenceJudgment> parse_preferences_text(std::string_view content) {
  static constexpr std::pair<std::string_view, Verdict> verdicts[] = {
      {"a_better", Verdict::a_better}, {"b_better", Verdict::b_better}, {"same", Verdict::same}};
  std::vector<PreferenceJudgment> out;
  detail::for_each_json_line(content, [&](const nlohmann::json& j, std::size_t line) {
    detail::FieldReader r(j, detail::at_line(line));
    PreferenceJudgment p;
    p.instance_id = r.nonempty_string("instance_id");
    p.system_a = r.nonempty_string("system_a");
    p.system_b = r.nonempty_string("system_b");
    if (p.system_a == p.system_b) r.fail("system_a and system_b must differ");
    p.verdict = r.choice("verdict", verdicts);
    out.push_back(std::move(p));
  });
  return out;
}

inline std::vector<PreferenceJudgment> parse_preferences(const std::string& path) {
  try {
    return parse_preferences_text(read_file(path));
  } catch (const data_error& e) {
    throw data_error(path + ": " + e.what());
  }
}

inline std::string serialize_preferences(const std::vector<PreferenceJudgment>& prefs) {
  std::string out;
  for (const auto& p : prefs) {
    nlohmann::json j{{"instance_id", p.instance_id},
                     {"system_a", p.system_a},
                     {"system_b", p.system_b},
                     {"verdict", std::string(to_string(p.verdict))}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

// Every judgment must name an existing instance and two systems that answered it.
inline void validate_preferences(const std::vector<PreferenceJudgment>& prefs,
                                 const std::vector<EvalInstance>& instances) {
  std::map<std::string_view, const EvalInstance*> index;
  for (const auto& inst : instances) index.emplace(inst.instance_id, &inst);
  for (const auto& p : prefs) {
    auto it = index.find(p.instance_id);
    if (it == index.end()) throw data_error("preference references unknown instance \"" + p.instance_id + "\"");
    for (const auto* sys : {&p.system_a, &p.system_b})
      if (!it->second->system_responses.count(*sys))
        throw data_error("instance \"" + p.instance_id + "\" has no response from system \"" + *sys + "\"");
  }
}

inline std::vector<SentencePair> parse_pairs_text(std::string_view content) {
  static constexpr std::pair<std::string_view, PairLabel> labels[] = {
      {"same_behavior", PairLabel::same_behavior}, {"different_behavior", PairLabel::different_behavior}};
  static constexpr std::pair<std::string_view, PairSource> sources[] = {{"original", PairSource::original},
                                                                        {"hard_negative", PairSource::hard_negative}};
  std::vector<SentencePair> out;
  detail::for_each_json_line(content, [&](const nlohmann::json& j, std::size_t line) {
    detail::FieldReader r(j, detail::at_line(line));
    SentencePair p;
    p.text_a = r.nonempty_string("text_a");
    p.text_b = r.nonempty_string("text_b");
    p.label = r.choice("label", labels);
    p.source = r.choice("source", sources);
    out.push_back(std::move(p));
  });
  return out;
}

inline std::vector<SentencePair> parse_pairs(const std::string& path) {
  try {
    return parse_pairs_text(read_file(path));
  } catch (const data_error& e) {
    throw data_error(path + ": " + e.what());
  }
}

inline std::string serialize_pairs(const std::vector<SentencePair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::json j{{"text_a", p.text_a},
                     {"text_b", p.text_b},
                     {"label", std::string(to_string(p.label))},
                     {"source", std::string(to_string(p.source))}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

// Recommender turns that carry a behavior label, in corpus order.
inline std::vector<std::pair<std::string, BehaviorLabel>> labeled_recommender_sentences(
    const std::vector<Dialogue>& dialogues) {
  std::vector<std::pair<std::string, BehaviorLabel>> out;
  for (const auto& d : dialogues)
    for (const auto& t : d.turns)
      if (t.speaker == Speaker::recommender && t.behavior) out.emplace_back(t.text, *t.behavior);
  return out;
}

}  // namespace bacrs
