#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bacrs/agreement.hpp"
#include "bacrs/behavior_metrics.hpp"
#include "bacrs/error.hpp"
#include "bacrs/features.hpp"
#include "bacrs/hash.hpp"
#include "bacrs/linear_model.hpp"
#include "bacrs/text_metrics.hpp"

namespace bacrs {

struct RunConfig {
  // inputs and outputs
  std::string dialogues;
  std::string responses;
  std::string preferences;
  std::string pairs;
  std::string model;
  std::string hard_pairs;
  std::string pairs_dir = ".";
  std::string format = "json";
  std::string out;

  // metrics
  std::string system;
  std::string metric = "ba";
  int bleu_k = 2;
  int dist_k = 2;
  std::string dist_scope = "corpus";
  std::string normalization_mode = "scored_turns";
  int markov_t = 1;
  double alpha = 1.0;
  double h_min = 0.1;
  std::optional<double> tie_eps;
  std::string success_definition = "any";
  double pair_threshold = 0.5;
  double hard_threshold = 0.7;

  // features and training
  int hash_bits = 18;
  int word_ngram_min = 1;
  int word_ngram_max = 2;
  int char_ngram_min = 3;
  int char_ngram_max = 5;
  bool per_side_blocks = true;
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 256;
  double l2 = 1e-6;
  std::int64_t n_pos = 50000;
  std::int64_t n_neg = 50000;
  std::int64_t n_hard = 10000;
  int folds = 5;
  double test_fraction = 0.2;

  // bootstrap and seeding
  int bootstrap_b = 1000;
  std::uint64_t seed = 42;
  double quantile_low = 0.025;
  double quantile_high = 0.975;
  int threads = 1;

  // differentiation experiment
  std::int64_t pool_size = 100;
  std::vector<double> blend_ratios = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::string> synth_metrics = {"ba", "bleu", "dist"};

  FeatureConfig feature_config() const {
    FeatureConfig c;
    c.hash_bits = hash_bits;
    c.word_ngram_min = word_ngram_min;
    c.word_ngram_max = word_ngram_max;
    c.char_ngram_min = char_ngram_min;
    c.char_ngram_max = char_ngram_max;
    c.per_side_blocks = per_side_blocks;
    return c;
  }

  TrainHyper train_hyper() const { return {learning_rate, epochs, batch_size, l2, seed}; }

  BootstrapOptions bootstrap() const {
    BootstrapOptions b;
    b.b = bootstrap_b;
    b.seed = seed;
    b.q_low = quantile_low;
    b.q_high = quantile_high;
    b.threads = static_cast<unsigned>(threads);
    return b;
  }

  MetricParams metric_params() const { return {bleu_k, dist_k, tie_eps}; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] inline void type_error(std::string_view key, std::string_view expected, std::string_view got) {
  throw usage_error("config key \"" + std::string(key) + "\": expected " + std::string(expected) + ", got \"" +
                    std::string(got) + "\"");
}

template <class Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) type_error(key, "integer", v);
  return out;
}

inline double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) type_error(key, "real number", v);
  return out;
}

inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = v.find(',', pos);
    out.push_back(trim(v.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct KeySpec {
  std::string name;
  std::string type;  // for diagnostics
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
  std::function<nlohmann::json(const RunConfig&)> json;
};

template <class M>
KeySpec string_key(std::string name, M RunConfig::*field, std::vector<std::string> choices = {}) {
  std::string type = "string";
  if (!choices.empty()) {
    type = "one of ";
    for (std::size_t i = 0; i < choices.size(); ++i) type += (i ? "|" : "") + choices[i];
  }
  return {name, type,
          [name, field, choices, type](RunConfig& c, std::string_view v) {
            if (!choices.empty() && std::find(choices.begin(), choices.end(), v) == choices.end())
              type_error(name, type, v);
            c.*field = std::string(v);
          },
          [field](const RunConfig& c) { return c.*field; },
          [field](const RunConfig& c) { return nlohmann::json(c.*field); }};
}

template <class Int>
KeySpec int_key(std::string name, Int RunConfig::*field) {
  return {name, "integer", [name, field](RunConfig& c, std::string_view v) { c.*field = parse_int<Int>(name, v); },
          [field](const RunConfig& c) { return std::to_string(c.*field); },
          [field](const RunConfig& c) { return nlohmann::json(c.*field); }};
}

inline KeySpec real_key(std::string name, double RunConfig::*field) {
  return {name, "real number", [name, field](RunConfig& c, std::string_view v) { c.*field = parse_real(name, v); },
          [field](const RunConfig& c) { return format_real(c.*field); },
          [field](const RunConfig& c) { return nlohmann::json(c.*field); }};
}

inline KeySpec bool_key(std::string name, bool RunConfig::*field) {
  return {name, "boolean (true|false)",
          [name, field](RunConfig& c, std::string_view v) {
            if (v == "true") c.*field = true;
            else if (v == "false") c.*field = false;
            else type_error(name, "boolean (true|false)", v);
          },
          [field](const RunConfig& c) { return std::string(c.*field ? "true" : "false"); },
          [field](const RunConfig& c) { return nlohmann::json(c.*field); }};
}

inline const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    k.push_back(string_key("dialogues", &RunConfig::dialogues));
    k.push_back(string_key("responses", &RunConfig::responses));
    k.push_back(string_key("preferences", &RunConfig::preferences));
    k.push_back(string_key("pairs", &RunConfig::pairs));
    k.push_back(string_key("model", &RunConfig::model));
    k.push_back(string_key("hard_pairs", &RunConfig::hard_pairs));
    k.push_back(string_key("pairs_dir", &RunConfig::pairs_dir));
    k.push_back(string_key("format", &RunConfig::format, {"json", "csv", "markdown"}));
    k.push_back(string_key("out", &RunConfig::out));
    k.push_back(string_key("system", &RunConfig::system));
    k.push_back(string_key("metric", &RunConfig::metric, {"ba", "bleu", "dist", "all"}));
    k.push_back(int_key("bleu_k", &RunConfig::bleu_k));
    k.push_back(int_key("dist_k", &RunConfig::dist_k));
    k.push_back(string_key("dist_scope", &RunConfig::dist_scope, {"corpus", "per_response"}));
    k.push_back(string_key("normalization_mode", &RunConfig::normalization_mode, {"scored_turns", "paper_literal"}));
    k.push_back(int_key("markov_t", &RunConfig::markov_t));
    k.push_back(real_key("alpha", &RunConfig::alpha));
    k.push_back(real_key("h_min", &RunConfig::h_min));
    k.push_back({"tie_eps", "real number or auto",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "auto") c.tie_eps.reset();
                   else c.tie_eps = parse_real("tie_eps", v);
                 },
                 [](const RunConfig& c) { return c.tie_eps ? format_real(*c.tie_eps) : std::string("auto"); },
                 [](const RunConfig& c) { return c.tie_eps ? nlohmann::json(*c.tie_eps) : nlohmann::json("auto"); }});
    k.push_back(string_key("success_definition", &RunConfig::success_definition, {"any", "first"}));
    k.push_back(real_key("pair_threshold", &RunConfig::pair_threshold));
    k.push_back(real_key("hard_threshold", &RunConfig::hard_threshold));
    k.push_back(int_key("hash_bits", &RunConfig::hash_bits));
    k.push_back(int_key("word_ngram_min", &RunConfig::word_ngram_min));
    k.push_back(int_key("word_ngram_max", &RunConfig::word_ngram_max));
    k.push_back(int_key("char_ngram_min", &RunConfig::char_ngram_min));
    k.push_back(int_key("char_ngram_max", &RunConfig::char_ngram_max));
    k.push_back(bool_key("per_side_blocks", &RunConfig::per_side_blocks));
    k.push_back(real_key("learning_rate", &RunConfig::learning_rate));
    k.push_back(int_key("epochs", &RunConfig::epochs));
    k.push_back(int_key("batch_size", &RunConfig::batch_size));
    k.push_back(real_key("l2", &RunConfig::l2));
    k.push_back(int_key("n_pos", &RunConfig::n_pos));
    k.push_back(int_key("n_neg", &RunConfig::n_neg));
    k.push_back(int_key("n_hard", &RunConfig::n_hard));
    k.push_back(int_key("folds", &RunConfig::folds));
    k.push_back(real_key("test_fraction", &RunConfig::test_fraction));
    k.push_back(int_key("bootstrap_b", &RunConfig::bootstrap_b));
    k.push_back(int_key("seed", &RunConfig::seed));
    k.push_back(real_key("quantile_low", &RunConfig::quantile_low));
    k.push_back(real_key("quantile_high", &RunConfig::quantile_high));
    k.push_back(int_key("threads", &RunConfig::threads));
    k.push_back(int_key("pool_size", &RunConfig::pool_size));
    k.push_back({"blend_ratios", "comma-separated real numbers",
                 [](RunConfig& c, std::string_view v) {
                   c.blend_ratios.clear();
                   for (auto item : split_list(v)) c.blend_ratios.push_back(parse_real("blend_ratios", item));
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.blend_ratios.size(); ++i)
                     s += (i ? "," : "") + format_real(c.blend_ratios[i]);
                   return s;
                 },
                 [](const RunConfig& c) { return nlohmann::json(c.blend_ratios); }});
    k.push_back({"synth_metrics", "comma-separated metric names (ba|bleu|dist)",
                 [](RunConfig& c, std::string_view v) {
                   c.synth_metrics.clear();
                   for (auto item : split_list(v)) {
                     if (item != "ba" && item != "bleu" && item != "dist")
                       type_error("synth_metrics", "comma-separated metric names (ba|bleu|dist)", item);
                     c.synth_metrics.emplace_back(item);
                   }
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.synth_metrics.size(); ++i) s += (i ? "," : "") + c.synth_metrics[i];
                   return s;
                 },
                 [](const RunConfig& c) { return nlohmann::json(c.synth_metrics); }});
    return k;
  }();
  return keys;
}

inline const KeySpec& find_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw usage_error("unknown config key \"" + std::string(name) + "\"");
}

inline std::string_view unquote(std::string_view v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace detail

inline void set_config_value(RunConfig& c, std::string_view key, std::string_view value) {
  detail::find_key(detail::trim(key)).set(c, detail::unquote(detail::trim(value)));
}

// Applies `key = value` lines over `base`. Blank lines and lines starting
// with '#' are ignored.
inline void apply_config_text(RunConfig& c, std::string_view text) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw usage_error("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      set_config_value(c, line.substr(0, eq), line.substr(eq + 1));
    } catch (const usage_error& e) {
      throw usage_error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void apply_override(RunConfig& c, std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos) throw usage_error("override \"" + std::string(kv) + "\" is not key=value");
  set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
}

// defaults <- file <- overrides
inline RunConfig load_config(const std::string& path, std::span<const std::string> overrides = {}) {
  RunConfig c;
  if (!path.empty()) {
    std::string text;
    try {
      text = read_file(path);
    } catch (const data_error& e) {
      throw usage_error(e.what());
    }
    apply_config_text(c, text);
  }
  for (const auto& o : overrides) apply_override(c, o);
  return c;
}

inline std::string serialize_config(const RunConfig& c) {
  std::string out;
  for (const auto& k : detail::config_keys()) out += k.name + " = " + k.get(c) + "\n";
  return out;
}

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : detail::config_keys()) j[k.name] = k.json(c);
  return j;
}

}  // namespace bacrs
