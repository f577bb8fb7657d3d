#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bacrs/agreement.hpp"
#include "bacrs/behavior_metrics.hpp"
#include "bacrs/config.hpp"
#include "bacrs/corpus.hpp"
#include "bacrs/error.hpp"
#include "bacrs/hash.hpp"
#include "bacrs/pair_classifier.hpp"
#include "bacrs/synth_lab.hpp"
#include "bacrs/text_metrics.hpp"
#include "bacrs/version.hpp"

namespace bacrs::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Context {
  std::string command;
  RunConfig cfg;
  json inputs = json::object();
  std::vector<std::string> warnings;
};

// What a subcommand produces; csv and markdown bodies are optional.
struct Output {
  json result = json::object();
  std::string csv;
  std::string markdown;
};

namespace detail {

inline std::string num(double v) { return bacrs::detail::format_real(v); }

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw usage_error(std::string("missing required option --") + flag);
  return value;
}

inline void record_input(Context& ctx, const std::string& key, const std::string& path) {
  ctx.inputs[key] = {{"path", path}, {"hash", file_content_hash(path)}};
}

inline std::vector<Dialogue> load_dialogues(Context& ctx) {
  const auto& path = require(ctx.cfg.dialogues, "dialogues");
  record_input(ctx, "dialogues", path);
  return parse_dialogues(path);
}

inline std::vector<EvalInstance> load_instances(Context& ctx, const std::vector<Dialogue>& dialogues) {
  const auto& path = require(ctx.cfg.responses, "responses");
  record_input(ctx, "responses", path);
  return extract_eval_instances(dialogues, path);
}

inline std::vector<PreferenceJudgment> load_preferences(Context& ctx, const std::vector<EvalInstance>& instances) {
  const auto& path = require(ctx.cfg.preferences, "preferences");
  record_input(ctx, "preferences", path);
  auto prefs = parse_preferences(path);
  validate_preferences(prefs, instances);
  return prefs;
}

inline std::vector<SentencePair> load_pairs(Context& ctx) {
  const auto& path = require(ctx.cfg.pairs, "pairs");
  record_input(ctx, "pairs", path);
  return parse_pairs(path);
}

inline std::set<std::string> systems_of(const std::vector<EvalInstance>& instances) {
  std::set<std::string> s;
  for (const auto& inst : instances)
    for (const auto& [name, r] : inst.system_responses) s.insert(name);
  return s;
}

// The configured system, or the only one present.
inline std::string pick_system(const Context& ctx, const std::vector<EvalInstance>& instances) {
  const auto systems = systems_of(instances);
  if (!ctx.cfg.system.empty()) {
    if (!systems.count(ctx.cfg.system)) throw data_error("no responses from system \"" + ctx.cfg.system + "\"");
    return ctx.cfg.system;
  }
  if (systems.size() == 1) return *systems.begin();
  std::string names;
  for (const auto& s : systems) names += (names.empty() ? "" : ", ") + s;
  throw usage_error("several systems present (" + names + "); choose one with --system");
}

inline json report_json(const AlignmentReport& r) {
  json per = json::array();
  for (const auto& e : r.per_instance)
    per.push_back({{"instance_id", e.instance_id}, {"ba", e.ba}, {"weight", e.weight}, {"scored", e.scored}});
  return {{"system", r.system},
          {"normalization_mode", std::string(to_string(r.normalization_mode))},
          {"aggregate", r.aggregate},
          {"n_scored", r.n_scored},
          {"n_excluded", r.n_excluded},
          {"per_instance", std::move(per)}};
}

inline std::string report_csv(const AlignmentReport& r) {
  std::string s = "instance_id,ba,weight\n";
  for (const auto& e : r.per_instance) s += e.instance_id + "," + std::to_string(e.ba) + "," + num(e.weight) + "\n";
  return s;
}

inline std::string report_markdown(const AlignmentReport& r, const std::string& title) {
  return "## " + title + "\n\n| System | Aggregate | Scored turns | Excluded first turns | Normalization |\n"
         "|---|---|---|---|---|\n| " + r.system + " | " + fixed(r.aggregate) + " | " + std::to_string(r.n_scored) +
         " | " + std::to_string(r.n_excluded) + " | " + std::string(to_string(r.normalization_mode)) + " |\n";
}

inline std::vector<MetricKind> metrics_of(const std::string& metric) {
  if (metric == "all") return {MetricKind::ba, MetricKind::bleu, MetricKind::dist};
  return {parse_metric_kind(metric)};
}

inline json confusion_json(const ConfusionMatrix& cm) {
  json labels = json::array();
  for (auto b : all_behaviors()) labels.push_back(std::string(to_string(b)));
  json rows = json::array();
  for (const auto& row : cm.counts) rows.push_back(row);
  return {{"labels", std::move(labels)}, {"counts", std::move(rows)}};
}

inline json hard_pairs_json(const std::vector<HardPair>& pairs) {
  json a = json::array();
  for (const auto& p : pairs)
    a.push_back({{"class", std::string(to_string(p.cls))}, {"partner", std::string(to_string(p.partner))}});
  return a;
}

inline std::vector<HardPair> hard_pairs_from_json(const json& j) {
  const json* arr = &j;
  if (j.is_object()) {
    if (j.contains("result") && j["result"].contains("hard_pairs")) arr = &j["result"]["hard_pairs"];
    else if (j.contains("hard_pairs")) arr = &j["hard_pairs"];
  }
  if (!arr->is_array()) throw data_error("hard pairs file has no hard_pairs array");
  std::vector<HardPair> out;
  for (const auto& e : *arr)
    out.push_back({parse_behavior(e.at("class").get<std::string>()), parse_behavior(e.at("partner").get<std::string>())});
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot write " + path);
  f << content;
}

// ---------------------------------------------------------------------------

inline Output cmd_validate(Context& ctx) {
  Output o;
  const auto dialogues = load_dialogues(ctx);
  std::size_t turns = 0;
  std::size_t labeled = 0;
  for (const auto& d : dialogues)
    for (const auto& t : d.turns) {
      ++turns;
      labeled += (t.speaker == Speaker::recommender && t.behavior) ? 1 : 0;
    }
  o.result["dialogues"] = dialogues.size();
  o.result["turns"] = turns;
  o.result["labeled_recommender_turns"] = labeled;
  if (!ctx.cfg.responses.empty()) {
    const auto instances = load_instances(ctx, dialogues);
    o.result["instances"] = instances.size();
    o.result["systems"] = systems_of(instances);
    if (!ctx.cfg.preferences.empty()) o.result["preferences"] = load_preferences(ctx, instances).size();
  }
  if (!ctx.cfg.pairs.empty()) {
    const auto pairs = load_pairs(ctx);
    std::size_t same = 0;
    std::size_t hard = 0;
    for (const auto& p : pairs) {
      same += p.label == PairLabel::same_behavior;
      hard += p.source == PairSource::hard_negative;
    }
    o.result["pairs"] = {{"total", pairs.size()}, {"same_behavior", same}, {"hard_negative", hard}};
  }
  o.result["valid"] = true;
  o.csv = "key,value\ndialogues," + std::to_string(dialogues.size()) + "\nturns," + std::to_string(turns) + "\n";
  o.markdown = "## Validation\n\nAll inputs are valid: " + std::to_string(dialogues.size()) + " dialogues, " +
               std::to_string(turns) + " turns.\n";
  return o;
}

inline Output cmd_ba(Context& ctx) {
  const auto dialogues = load_dialogues(ctx);
  const auto instances = load_instances(ctx, dialogues);
  const auto system = pick_system(ctx, instances);
  const auto r = behavior_alignment(instances, system, parse_normalization_mode(ctx.cfg.normalization_mode));
  return {report_json(r), report_csv(r), report_markdown(r, "Behavior Alignment")};
}

inline Output cmd_weighted_ba(Context& ctx) {
  const auto dialogues = load_dialogues(ctx);
  const auto instances = load_instances(ctx, dialogues);
  const auto system = pick_system(ctx, instances);
  const auto model = fit_markov(dialogues, ctx.cfg.markov_t, ctx.cfg.alpha);
  const auto r = weighted_behavior_alignment(instances, system, model, ctx.cfg.h_min);
  Output o{report_json(r), report_csv(r), report_markdown(r, "Entropy-weighted Behavior Alignment")};
  o.result["markov"] = {{"order_t", model.order_t}, {"alpha", model.smoothing_alpha}, {"histories", model.counts.size()}};
  o.result["h_min"] = ctx.cfg.h_min;
  return o;
}

inline Output cmd_textmetrics(Context& ctx) {
  const auto dialogues = load_dialogues(ctx);
  const auto instances = load_instances(ctx, dialogues);
  std::vector<std::string> systems;
  if (!ctx.cfg.system.empty()) systems.push_back(pick_system(ctx, instances));
  else for (const auto& s : systems_of(instances)) systems.push_back(s);
  const auto scope = ctx.cfg.dist_scope == "corpus" ? DistScope::corpus : DistScope::per_response;
  Output o;
  json rows = json::array();
  o.csv = "system,bleu_k,bleu,dist_k,dist_scope,dist,n\n";
  o.markdown = "## Text metrics\n\n| System | BLEU@" + std::to_string(ctx.cfg.bleu_k) + " | DIST@" +
               std::to_string(ctx.cfg.dist_k) + " (" + ctx.cfg.dist_scope + ") | Responses |\n|---|---|---|---|\n";
  for (const auto& s : systems) {
    double bleu_sum = 0.0;
    std::vector<TokenSequence> toks;
    for (const auto& inst : instances) {
      auto it = inst.system_responses.find(s);
      if (it == inst.system_responses.end()) continue;
      toks.push_back(tokenize(it->second.text));
      const auto ref = tokenize(inst.human_text);
      if (ref.empty()) throw data_error("human reference has no tokens at \"" + inst.instance_id + "\"");
      bleu_sum += bleu_k(toks.back(), ref, ctx.cfg.bleu_k);
    }
    const double bleu = toks.empty() ? 0.0 : bleu_sum / static_cast<double>(toks.size());
    const double dist = dist_k(toks, ctx.cfg.dist_k, scope);
    rows.push_back({{"system", s}, {"bleu", bleu}, {"dist", dist}, {"n", toks.size()}});
    o.csv += s + "," + std::to_string(ctx.cfg.bleu_k) + "," + num(bleu) + "," + std::to_string(ctx.cfg.dist_k) + "," +
             ctx.cfg.dist_scope + "," + num(dist) + "," + std::to_string(toks.size()) + "\n";
    o.markdown += "| " + s + " | " + fixed(bleu) + " | " + fixed(dist) + " | " + std::to_string(toks.size()) + " |\n";
  }
  o.result["bleu_k"] = ctx.cfg.bleu_k;
  o.result["dist_k"] = ctx.cfg.dist_k;
  o.result["dist_scope"] = ctx.cfg.dist_scope;
  o.result["systems"] = std::move(rows);
  return o;
}

inline Output cmd_agreement(Context& ctx) {
  const auto dialogues = load_dialogues(ctx);
  const auto instances = load_instances(ctx, dialogues);
  const auto prefs = load_preferences(ctx, instances);
  Output o;
  json arr = json::array();
  o.csv = "metric,kappa,ci_low,ci_high,b,seed,n_items\n";
  o.markdown = "## Agreement with human preference (Cohen's kappa)\n\n| Metric | Kappa | 2.5% | 97.5% | Items |\n"
               "|---|---|---|---|---|\n";
  for (auto m : metrics_of(ctx.cfg.metric)) {
    const auto r = agreement(instances, prefs, m, ctx.cfg.metric_params(), ctx.cfg.bootstrap());
    if (r.constant_raters)
      ctx.warnings.push_back(r.metric + ": metric and human verdicts are one identical constant; kappa reported as 1");
    arr.push_back({{"metric", r.metric},
                   {"kappa", r.kappa},
                   {"ci_low", r.ci_low},
                   {"ci_high", r.ci_high},
                   {"b", r.bootstrap_b},
                   {"seed", r.seed},
                   {"n_items", r.n_items}});
    o.csv += r.metric + "," + num(r.kappa) + "," + num(r.ci_low) + "," + num(r.ci_high) + "," +
             std::to_string(r.bootstrap_b) + "," + std::to_string(r.seed) + "," + std::to_string(r.n_items) + "\n";
    o.markdown += "| " + r.metric + " | " + fixed(r.kappa, 3) + " | " + fixed(r.ci_low, 3) + " | " +
                  fixed(r.ci_high, 3) + " | " + std::to_string(r.n_items) + " |\n";
  }
  o.result["agreements"] = std::move(arr);
  return o;
}

struct MiningRun {
  std::vector<LabeledSentence> train;
  std::vector<LabeledSentence> test;
  ConfusionMatrix confusion;
  AccuracyMap accuracy;
  std::vector<HardPair> hard_pairs;
};

inline MiningRun run_mining(Context& ctx, const std::vector<LabeledSentence>& sentences) {
  MiningRun m;
  std::tie(m.train, m.test) = split_train_test(sentences, ctx.cfg.test_fraction, ctx.cfg.seed);
  if (m.test.empty()) throw data_error("not enough labeled sentences for a held-out split");
  const auto model = train_multiclass(m.train, ctx.cfg.feature_config(), ctx.cfg.train_hyper());
  std::tie(m.confusion, m.accuracy) = confusion_and_accuracy(model, m.test);
  m.hard_pairs = mine_hard_negative_classes(m.accuracy, m.confusion, ctx.cfg.hard_threshold, &ctx.warnings);
  return m;
}

inline Output cmd_mine_hard(Context& ctx) {
  const auto dialogues = load_dialogues(ctx);
  const auto sentences = labeled_recommender_sentences(dialogues);
  const auto m = run_mining(ctx, sentences);
  Output o;
  json acc = json::object();
  for (const auto& [label, a] : m.accuracy) acc[std::string(to_string(label))] = a;
  o.result["split"] = {{"train", m.train.size()}, {"test", m.test.size()}, {"test_fraction", ctx.cfg.test_fraction},
                       {"stratified", true}, {"seed", ctx.cfg.seed}};
  o.result["accuracy"] = std::move(acc);
  o.result["confusion"] = confusion_json(m.confusion);
  o.result["threshold"] = ctx.cfg.hard_threshold;
  o.result["hard_pairs"] = hard_pairs_json(m.hard_pairs);

  // Table-3 style listing: the two most frequent confusions of every weak class.
  json weak = json::array();
  o.markdown = "## Classes below accuracy " + fixed(ctx.cfg.hard_threshold, 2) +
               "\n\n| Behavior Type | Accuracy | 1st Misclassification | 2nd Misclassification |\n|---|---|---|---|\n";
  o.csv = "class,accuracy,first,second\n";
  for (const auto& [label, a] : m.accuracy) {
    if (!(a < ctx.cfg.hard_threshold)) continue;
    const auto r = index_of(label);
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < kNumBehaviors; ++c)
      if (c != r && m.confusion.counts[r][c] > 0) cols.push_back(c);
    std::stable_sort(cols.begin(), cols.end(), [&](std::size_t x, std::size_t y) {
      const auto cx = m.confusion.counts[r][x];
      const auto cy = m.confusion.counts[r][y];
      if (cx != cy) return cx > cy;
      return m.confusion.col_sum(x) > m.confusion.col_sum(y);
    });
    auto name = [&](std::size_t k) { return k < cols.size() ? std::string(to_string(behavior_at(cols[k]))) : std::string("-"); };
    weak.push_back({{"class", std::string(to_string(label))}, {"accuracy", a}, {"first", name(0)}, {"second", name(1)}});
    o.markdown += "| " + std::string(to_string(label)) + " | " + fixed(a, 2) + " | " + name(0) + " | " + name(1) + " |\n";
    o.csv += std::string(to_string(label)) + "," + num(a) + "," + name(0) + "," + name(1) + "\n";
  }
  o.result["weak_classes"] = std::move(weak);
  return o;
}

inline Output cmd_build_pairs(Context& ctx) {
  const auto dialogues = load_dialogues(ctx);
  const auto sentences = labeled_recommender_sentences(dialogues);
  std::vector<HardPair> hard;
  if (!ctx.cfg.hard_pairs.empty()) {
    record_input(ctx, "hard_pairs", ctx.cfg.hard_pairs);
    try {
      hard = hard_pairs_from_json(json::parse(read_file(ctx.cfg.hard_pairs)));
    } catch (const json::exception& e) {
      throw data_error(ctx.cfg.hard_pairs + ": " + e.what());
    }
  } else {
    hard = run_mining(ctx, sentences).hard_pairs;
  }
  if (ctx.cfg.n_pos < 0 || ctx.cfg.n_neg < 0 || ctx.cfg.n_hard < 0) throw usage_error("pair counts must be >= 0");
  const TrainingSetSizes sizes{static_cast<std::size_t>(ctx.cfg.n_pos), static_cast<std::size_t>(ctx.cfg.n_neg),
                               static_cast<std::size_t>(ctx.cfg.n_hard)};
  const auto sets = build_training_sets(sentences, sizes, hard, ctx.cfg.seed);
  if (sets.effective.n_pos < sizes.n_pos)
    ctx.warnings.push_back("corpus too small for the requested pair counts; scaled by " + num(sets.scale));
  if (hard.empty() && sizes.n_hard > 0) ctx.warnings.push_back("no hard-negative classes; mixed_hard equals original");
  std::filesystem::create_directories(ctx.cfg.pairs_dir);
  const auto original_path = (std::filesystem::path(ctx.cfg.pairs_dir) / "original.jsonl").string();
  const auto mixed_path = (std::filesystem::path(ctx.cfg.pairs_dir) / "mixed_hard.jsonl").string();
  write_text_file(original_path, serialize_pairs(sets.original));
  write_text_file(mixed_path, serialize_pairs(sets.mixed_hard));
  Output o;
  o.result["requested"] = {{"n_pos", sizes.n_pos}, {"n_neg", sizes.n_neg}, {"n_hard", sizes.n_hard}};
  o.result["effective"] = {{"n_pos", sets.effective.n_pos}, {"n_neg", sets.effective.n_neg}, {"n_hard", sets.effective.n_hard}};
  o.result["scale"] = std::min(1.0, sets.scale);
  o.result["hard_pairs"] = hard_pairs_json(hard);
  o.result["outputs"] = {{"original", {{"path", original_path}, {"hash", file_content_hash(original_path)}}},
                         {"mixed_hard", {{"path", mixed_path}, {"hash", file_content_hash(mixed_path)}}}};
  o.csv = "set,pairs,hard_negatives\noriginal," + std::to_string(sets.original.size()) + ",0\nmixed_hard," +
          std::to_string(sets.mixed_hard.size()) + "," + std::to_string(sets.effective.n_hard) + "\n";
  o.markdown = "## Sentence-pair training sets\n\n| Set | Pairs | Hard negatives |\n|---|---|---|\n| Original | " +
               std::to_string(sets.original.size()) + " | 0 |\n| Mixed-hard | " + std::to_string(sets.mixed_hard.size()) +
               " | " + std::to_string(sets.effective.n_hard) + " |\n";
  return o;
}

inline Output cmd_train_pairs(Context& ctx) {
  const auto pairs = load_pairs(ctx);
  const auto& model_path = require(ctx.cfg.model, "model");
  const auto model = train_pair_classifier(pairs, ctx.cfg.feature_config(), ctx.cfg.train_hyper());
  save_pair_model(model, model_path);
  const double acc = pair_accuracy(model, pairs, ctx.cfg.pair_threshold);
  Output o;
  o.result["training_set_kind"] = std::string(to_string(model.training_set_kind));
  o.result["n_pairs"] = pairs.size();
  o.result["training_accuracy"] = acc;
  o.result["loss_history"] = model.loss_history;
  o.result["feature_config_hash"] = model.config.fingerprint();
  o.result["model"] = {{"path", model_path}, {"hash", file_content_hash(model_path)}};
  o.csv = "epoch,loss\n";
  for (std::size_t e = 0; e < model.loss_history.size(); ++e) o.csv += std::to_string(e) + "," + num(model.loss_history[e]) + "\n";
  o.markdown = "## Pair classifier\n\n| Training set | Pairs | Training accuracy | Final loss |\n|---|---|---|---|\n| " +
               std::string(to_string(model.training_set_kind)) + " | " + std::to_string(pairs.size()) + " | " +
               fixed(acc, 3) + " | " + fixed(model.loss_history.back(), 5) + " |\n";
  return o;
}

inline Output cmd_cross_validate(Context& ctx) {
  const auto pairs = load_pairs(ctx);
  const auto r = cross_validate(pairs, ctx.cfg.folds, ctx.cfg.feature_config(), ctx.cfg.train_hyper(), ctx.cfg.pair_threshold);
  Output o;
  o.result["k"] = ctx.cfg.folds;
  o.result["fold_accuracies"] = r.fold_accuracies;
  o.result["mean"] = r.mean;
  o.result["spread"] = r.spread;
  o.csv = "fold,accuracy\n";
  o.markdown = "## Cross-validation\n\n| Fold | Accuracy |\n|---|---|\n";
  for (std::size_t f = 0; f < r.fold_accuracies.size(); ++f) {
    o.csv += std::to_string(f) + "," + num(r.fold_accuracies[f]) + "\n";
    o.markdown += "| Fold" + std::to_string(f) + " | " + fixed(r.fold_accuracies[f], 3) + " |\n";
  }
  o.csv += "mean," + num(r.mean) + "\n";
  o.markdown += "| Averaged | " + fixed(r.mean, 3) + " |\n";
  return o;
}

inline Output cmd_implicit_ba(Context& ctx) {
  const auto dialogues = load_dialogues(ctx);
  const auto instances = load_instances(ctx, dialogues);
  const auto system = pick_system(ctx, instances);
  const auto& model_path = require(ctx.cfg.model, "model");
  record_input(ctx, "model", model_path);
  const auto model = load_pair_model(model_path);
  const LinearPairScorer scorer(model);
  const auto r = implicit_behavior_alignment(scorer, instances, system,
                                             parse_normalization_mode(ctx.cfg.normalization_mode), ctx.cfg.pair_threshold);
  Output o{report_json(r), report_csv(r), report_markdown(r, "Implicit Behavior Alignment")};
  o.result["training_set_kind"] = std::string(to_string(model.training_set_kind));
  o.result["threshold"] = ctx.cfg.pair_threshold;
  // With labels present, compare against the explicit metric turn by turn.
  try {
    const auto explicit_r = behavior_alignment(instances, system, r.normalization_mode);
    std::vector<int> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < r.per_instance.size(); ++i) {
      if (!r.per_instance[i].scored) continue;
      x.push_back(r.per_instance[i].ba);
      y.push_back(explicit_r.per_instance[i].ba);
    }
    std::size_t agree = 0;
    for (std::size_t i = 0; i < x.size(); ++i) agree += x[i] == y[i];
    const double acc = static_cast<double>(agree) / static_cast<double>(x.size());
    const double kappa = cohens_kappa(x, y);
    o.result["explicit"] = {{"aggregate", explicit_r.aggregate}, {"accuracy", acc}, {"kappa", kappa}};
    o.markdown += "\n| Compared to labels | Accuracy | Cohen's kappa |\n|---|---|---|\n| " +
                  std::string(to_string(model.training_set_kind)) + " | " + fixed(acc, 3) + " | " + fixed(kappa, 3) + " |\n";
  } catch (const data_error&) {
    o.result["explicit"] = nullptr;
  }
  return o;
}

inline Output cmd_synth(Context& ctx) {
  const auto dialogues = load_dialogues(ctx);
  const auto instances = load_instances(ctx, dialogues);
  const auto prefs = load_preferences(ctx, instances);
  if (ctx.cfg.pool_size < 1) throw usage_error("pool_size must be >= 1");
  const auto pool = build_pool(instances, prefs, static_cast<std::size_t>(ctx.cfg.pool_size), ctx.cfg.seed);
  if (pool.empty()) throw data_error("no non-tie preference judgments on scored instances to build a pool");
  std::vector<MetricKind> metrics;
  for (const auto& m : ctx.cfg.synth_metrics) metrics.push_back(parse_metric_kind(m));
  SynthParams params{ctx.cfg.bleu_k, ctx.cfg.dist_k, ctx.cfg.dist_scope == "corpus" ? DistScope::corpus : DistScope::per_response};
  const auto curve = differentiation_experiment(pool, metrics, ctx.cfg.blend_ratios, ctx.cfg.seed, params);
  Output o;
  json rows = json::array();
  o.csv = "p,metric,value,seed\n";
  for (const auto& row : curve) {
    rows.push_back({{"p", row.p}, {"metric", row.metric}, {"value", row.value}, {"seed", row.seed}});
    o.csv += num(row.p) + "," + row.metric + "," + num(row.value) + "," + std::to_string(row.seed) + "\n";
  }
  json mono = json::object();
  o.markdown = "## Differentiation curve\n\n| p |";
  for (auto m : metrics) o.markdown += " " + std::string(to_string(m)) + " |";
  o.markdown += "\n|---|";
  for (std::size_t i = 0; i < metrics.size(); ++i) o.markdown += "---|";
  o.markdown += "\n";
  for (std::size_t i = 0; i < curve.size(); i += metrics.size()) {
    o.markdown += "| " + fixed(curve[i].p, 2) + " |";
    for (std::size_t k = 0; k < metrics.size(); ++k) o.markdown += " " + fixed(curve[i + k].value) + " |";
    o.markdown += "\n";
  }
  std::set<double> distinct(ctx.cfg.blend_ratios.begin(), ctx.cfg.blend_ratios.end());
  if (distinct.size() >= 3) {
    o.markdown += "\n| Metric | Spearman rho |\n|---|---|\n";
    for (auto m : metrics) {
      const auto s = monotonicity(curve, to_string(m), &ctx.warnings);
      mono[std::string(to_string(m))] = {{"rho", s.rho}, {"degenerate", s.degenerate}};
      o.markdown += "| " + std::string(to_string(m)) + " | " + fixed(s.rho, 3) + " |\n";
    }
  }
  o.result["pool_size"] = pool.size();
  o.result["curve"] = std::move(rows);
  o.result["monotonicity"] = std::move(mono);
  return o;
}

inline Output cmd_stats(Context& ctx) {
  const auto dialogues = load_dialogues(ctx);
  const auto s = recommendation_stats(dialogues, parse_success_definition(ctx.cfg.success_definition));
  Output o;
  json counts = json::object();
  for (auto b : all_behaviors()) counts[std::string(to_string(b))] = s.behavior_counts[index_of(b)];
  o.result["n_dialogues"] = s.n_dialogues;
  o.result["n_recommending"] = s.n_recommending;
  o.result["turns_before_rec"] = s.mean_turns_before_rec ? json(*s.mean_turns_before_rec) : json(nullptr);
  o.result["success_rate"] = s.success_rate ? json(*s.success_rate) : json(nullptr);
  o.result["success_definition"] = ctx.cfg.success_definition;
  o.result["behavior_counts"] = std::move(counts);
  o.result["unlabeled_recommender_turns"] = s.unlabeled_recommender_turns;
  const std::string tbr = s.mean_turns_before_rec ? fixed(*s.mean_turns_before_rec, 3) : "-";
  const std::string sr = s.success_rate ? fixed(100.0 * *s.success_rate, 1) + "%" : "-";
  o.csv = "n_dialogues,n_recommending,turns_before_rec,success_rate\n" + std::to_string(s.n_dialogues) + "," +
          std::to_string(s.n_recommending) + "," + (s.mean_turns_before_rec ? num(*s.mean_turns_before_rec) : "") + "," +
          (s.success_rate ? num(*s.success_rate) : "") + "\n";
  o.markdown = "## Recommendation behavior\n\n| Corpus | #Turns before Rec | Success Rate |\n|---|---|---|\n| " +
               ctx.cfg.dialogues + " | " + tbr + " | " + sr + " |\n";
  return o;
}

struct Command {
  const char* name;
  const char* help;
  Output (*fn)(Context&);
};

inline const std::vector<Command>& commands() {
  static const std::vector<Command> c = {
      {"validate", "Validate corpus files", cmd_validate},
      {"ba", "Behavior Alignment of one system", cmd_ba},
      {"weighted-ba", "Entropy-weighted Behavior Alignment", cmd_weighted_ba},
      {"textmetrics", "BLEU@K and DIST@K per system", cmd_textmetrics},
      {"agreement", "Cohen's kappa between metric and human preferences", cmd_agreement},
      {"build-pairs", "Build Original and Mixed-hard sentence-pair sets", cmd_build_pairs},
      {"mine-hard", "Train the behavior classifier and mine hard-negative classes", cmd_mine_hard},
      {"train-pairs", "Train the same-behavior pair classifier", cmd_train_pairs},
      {"cross-validate", "k-fold cross-validation of the pair classifier", cmd_cross_validate},
      {"implicit-ba", "Behavior Alignment estimated by a pair classifier", cmd_implicit_ba},
      {"synth", "Differentiation experiment over blended synthetic systems", cmd_synth},
      {"stats", "Turns before first recommendation and success rate", cmd_stats},
  };
  return c;
}

inline std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

inline std::string envelope_comment(const Context& ctx) {
  std::string s = "# bacrs " + std::string(kVersion) + " " + ctx.command + "\n# config " + config_json(ctx.cfg).dump() + "\n";
  for (const auto& [key, v] : ctx.inputs.items())
    s += "# input " + key + " " + v["path"].get<std::string>() + " " + v["hash"].get<std::string>() + "\n";
  return s;
}

inline std::string render(const Context& ctx, const Output& o) {
  if (ctx.cfg.format == "csv") return envelope_comment(ctx) + o.csv;
  if (ctx.cfg.format == "markdown") {
    std::string s = o.markdown + "\n### Run\n\n- tool: bacrs " + std::string(kVersion) + "\n- command: " + ctx.command + "\n";
    for (const auto& [key, v] : ctx.inputs.items())
      s += "- input " + key + ": `" + v["path"].get<std::string>() + "` (" + v["hash"].get<std::string>() + ")\n";
    s += "\n```\n" + serialize_config(ctx.cfg) + "```\n";
    return s;
  }
  json report = {{"tool", "bacrs"},
                 {"version", std::string(kVersion)},
                 {"command", ctx.command},
                 {"config", config_json(ctx.cfg)},
                 {"inputs", ctx.inputs},
                 {"result", o.result},
                 {"warnings", ctx.warnings}};
  return report.dump(2) + "\n";
}

}  // namespace detail

// Entry point. `args` excludes the program name. Reports go to `out` (or the
// configured output path), diagnostics to `err`.
inline int run(std::span<const std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Behavior Alignment toolkit for conversational recommender evaluation", "bacrs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  struct SubState {
    std::string config_path;
    std::vector<std::string> sets;
    bool show_config = false;
    std::map<std::string, std::string> flags;
  };
  std::map<std::string, SubState> state;
  std::map<std::string, const detail::Command*> by_name;
  for (const auto& cmd : detail::commands()) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    auto& st = state[cmd.name];
    by_name[cmd.name] = &cmd;
    sub->add_option("--config", st.config_path, "Flat key = value config file");
    sub->add_option("--set", st.sets, "Override a config key (key=value), repeatable");
    sub->add_flag("--show-config", st.show_config, "Print the resolved config to stderr");
    for (const auto& key : bacrs::detail::config_keys())
      sub->add_option(detail::flag_name(key.name), st.flags[key.name], key.name + " (" + key.type + ")");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  auto& st = state[name];
  Context ctx;
  ctx.command = name;
  try {
    std::vector<std::string> overrides = st.sets;
    for (const auto& key : bacrs::detail::config_keys()) {
      if (sub->get_option(detail::flag_name(key.name))->count() > 0) overrides.push_back(key.name + "=" + st.flags[key.name]);
    }
    ctx.cfg = load_config(st.config_path, overrides);
    if (st.show_config) err << serialize_config(ctx.cfg);
    const auto output = by_name[name]->fn(ctx);
    for (const auto& w : ctx.warnings) err << "warning: " << w << "\n";
    const auto text = detail::render(ctx, output);
    if (ctx.cfg.out.empty()) {
      out << text;
    } else {
      detail::write_text_file(ctx.cfg.out, text);
    }
    return kOk;
  } catch (const usage_error& e) {
    err << "error: " << e.what() << "\n" << sub->help();
    return kUsage;
  } catch (const data_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const numeric_error& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, out, err);
}

}  // namespace bacrs::cli
