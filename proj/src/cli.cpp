// Copyright 2026 The hamtl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hamtl/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hamtl/checkpoint.hpp"
#include "hamtl/corpus.hpp"
#include "hamtl/error.hpp"
#include "hamtl/evaluation.hpp"
#include "hamtl/geo.hpp"
#include "hamtl/hash.hpp"
#include "hamtl/models.hpp"
#include "hamtl/training.hpp"

namespace hamtl::cli {
namespace fs = std::filesystem;
using corpus::TweetRecord;
using json = nlohmann::ordered_json;

namespace {

struct Options {
  std::string out_dir;
  std::uint64_t seed = 0;

  std::string input, train, dev, pool, weak, gold, hierarchy, checkpoint, vocab;

  bool keep_diacritics = false;

  std::vector<double> ratios = {0.8, 0.1, 0.1};
  std::size_t cap = 100000;
  bool user_disjoint = false;

  std::size_t countries = 4, states = 2, cities = 2;
  std::size_t synth_vocab = 500, tweets_per_city = 200, tweet_len = 12, tweets_per_user = 20;
  double state_drift = 0.5, city_drift = 0.5;

  std::string model = "single", task = "country", order = "city_first";
  double dropout = -1.0;  // negative: architecture default
  std::size_t heads = 4, embed_dim = 300, hidden = 500, max_len = 50, min_count = 1;

  std::size_t epochs = 15, batch_size = 8;
  std::optional<std::size_t> patience;  // default: min(5, epochs)
  double lr = 1e-3;
  std::string selection = "auto";

  std::string mode = "class_agnostic";
  double top_pct = 10.0;
  std::size_t min_tokens = 0;
  bool zero_diacritics = false, replies_only = false;

  std::string regime = "weak";

  std::vector<std::size_t> ns = {10, 25, 50, 75, 100, 500};
  std::vector<double> thresholds = {0.0, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
};

// Collects what a run read and wrote for the manifest.
struct Run {
  const Options& opt;
  fs::path out;
  json inputs = json::object();
  std::vector<std::string> outputs;

  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return out / name;
  }
  fs::path input(const std::string& path) {
    if (path.empty()) throw Error(ErrorCode::kInvalidArgument, "missing required input path");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    inputs[path] = hex64(fnv1a64(buf.str()));
    return path;
  }
};

std::vector<std::string> tokens_of(const TweetRecord& r, bool strip = true) {
  return corpus::tokenize(r.normalized_text.empty() ? corpus::normalize_text(r.raw_text, strip)
                                                    : r.normalized_text);
}

corpus::Vocabulary vocab_from(const std::vector<const std::vector<TweetRecord>*>& sets,
                              std::size_t min_count) {
  std::vector<std::vector<std::string>> docs;
  for (const auto* s : sets) {
    for (const auto& r : *s) docs.push_back(tokens_of(r));
  }
  return corpus::build_vocabulary(docs, min_count);
}

void encode_all(std::vector<TweetRecord>& records, const corpus::Vocabulary& vocab,
                std::size_t max_len) {
  for (auto& r : records) {
    auto enc = corpus::encode_sequence(tokens_of(r), vocab, max_len);
    r.token_ids = std::move(enc.token_ids);
    r.mask_len = enc.mask_len;
  }
}

template <class T>
T parse_or(std::optional<T> v, const std::string& what, const std::string& value) {
  if (!v) throw Error(ErrorCode::kInvalidArgument, "unknown " + what + " '" + value + "'");
  return *v;
}

models::ModelSpec spec_from(const Options& opt) {
  models::ModelSpec spec;
  spec.variant = parse_or(models::parse_variant(opt.model), "model", opt.model);
  spec.task = parse_or(parse_task(opt.task), "task", opt.task);
  spec.order = parse_or(models::parse_order(opt.order), "order", opt.order);
  spec.dropout_rate = opt.dropout < 0.0 ? models::default_dropout(spec.variant) : opt.dropout;
  spec.heads = opt.heads;
  spec.embed_dim = opt.embed_dim;
  spec.hidden_size = opt.hidden;
  spec.max_len = opt.max_len;
  return spec;
}

training::ClassLists classes_for(Run& run, const std::vector<Task>& tasks,
                                 const std::vector<const std::vector<TweetRecord>*>& sets) {
  if (!run.opt.hierarchy.empty()) {
    return training::class_lists(geo::load_and_validate_hierarchy(run.input(run.opt.hierarchy)),
                                 tasks);
  }
  training::ClassLists out;
  for (Task t : tasks) {
    std::set<std::string> names;
    for (const auto* s : sets) {
      for (const auto& r : *s) {
        if (r.labels && !r.labels->get(t).empty()) names.insert(r.labels->get(t));
      }
    }
    out[t].assign(names.begin(), names.end());
  }
  return out;
}

training::TrainConfig train_config_from(const Options& opt, const models::ModelSpec& spec) {
  training::TrainConfig cfg;
  cfg.max_epochs = opt.epochs;
  cfg.patience = opt.patience.value_or(std::min<std::size_t>(5, opt.epochs));
  cfg.batch_size = opt.batch_size;
  cfg.learning_rate = opt.lr;
  cfg.seed = opt.seed;
  const bool by_task = opt.selection == "task" || (opt.selection == "auto" && !spec.is_multi_task());
  if (!by_task && opt.selection != "mean" && opt.selection != "auto") {
    throw Error(ErrorCode::kInvalidArgument, "unknown selection '" + opt.selection + "'");
  }
  cfg.selection = by_task ? training::SelectionMetric::kTaskAccuracy
                          : training::SelectionMetric::kMeanTaskAccuracy;
  cfg.selection_task = spec.task;
  return cfg;
}

json epoch_json(const training::EpochRecord& rec) {
  json j;
  j["epoch"] = rec.epoch;
  j["selection_value"] = rec.selection_value;
  for (const auto& [task, acc] : rec.dev_accuracy) {
    j[std::string(task_name(task))] = {{"accuracy", acc}, {"macro_f1", rec.dev_macro_f1.at(task)}};
  }
  return j;
}

void write_history(Run& run, const std::string& name,
                   const std::vector<training::EpochRecord>& history) {
  std::ofstream out(run.output(name), std::ios::binary);
  training::write_history_csv(history, out);
}

void save_model(Run& run, const models::Model& model, const corpus::Vocabulary& vocab,
                const training::ClassLists& classes, const training::TrainResult& result) {
  vocab.save(run.output("vocab.txt"));
  CheckpointMeta meta;
  meta.spec = model.spec();
  meta.vocab_hash = vocab.hash();
  meta.seed = run.opt.seed;
  meta.epoch = result.best_epoch;
  if (result.best_epoch > 0) meta.dev_metrics = epoch_json(result.history[result.best_epoch - 1]);
  meta.classes = classes;
  save_checkpoint(run.output("checkpoint.bin"), model, meta);
}

struct LoadedModel {
  corpus::Vocabulary vocab;
  LoadedCheckpoint ckpt;
};

LoadedModel load_model(Run& run) {
  auto vocab = corpus::Vocabulary::load(run.input(run.opt.vocab));
  auto ckpt = load_checkpoint(run.input(run.opt.checkpoint), vocab.hash());
  return {std::move(vocab), std::move(ckpt)};
}

// --- subcommands ---------------------------------------------------------

void cmd_preprocess(Run& run) {
  const auto& opt = run.opt;
  const auto records = corpus::read_jsonl(run.input(opt.input));
  std::ofstream clean(run.output("clean.jsonl"), std::ios::binary);
  std::ofstream rejects(run.output("rejections.csv"), std::ios::binary);
  rejects << "tweet_id,reason\n";
  std::map<std::string, std::size_t> counts = {
      {"kept", 0}, {"retweet", 0}, {"too_few_arabic", 0}};
  for (TweetRecord r : records) {
    r.normalized_text = corpus::normalize_text(r.raw_text, !opt.keep_diacritics);
    const auto outcome = corpus::filter_tweet(r);
    if (outcome != corpus::FilterOutcome::kKeep) {
      const std::string reason(corpus::filter_outcome_name(outcome));
      ++counts[reason];
      rejects << r.tweet_id << ',' << reason << '\n';
      continue;
    }
    ++counts["kept"];
    auto j = json::parse(corpus::to_json_line(r));
    j["tokens"] = corpus::tokenize(r.normalized_text);
    clean << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
  json summary;
  summary["input"] = records.size();
  for (const auto& [k, n] : counts) summary[k] = n;
  std::ofstream(run.output("preprocess_summary.json")) << summary.dump(2) << '\n';
}

void cmd_split(Run& run) {
  const auto& opt = run.opt;
  const auto records = corpus::read_jsonl(run.input(opt.input));
  corpus::SplitOptions so;
  std::copy(opt.ratios.begin(), opt.ratios.end(), so.ratios.begin());
  so.cap = opt.cap;
  so.seed = opt.seed;
  so.user_disjoint = opt.user_disjoint;
  const auto splits = corpus::make_splits(records, so);
  corpus::write_jsonl(splits.train, run.output("train.jsonl"));
  corpus::write_jsonl(splits.dev, run.output("dev.jsonl"));
  corpus::write_jsonl(splits.test, run.output("test.jsonl"));
}

void cmd_synth(Run& run) {
  const auto& opt = run.opt;
  const auto hierarchy = opt.hierarchy.empty()
                             ? geo::make_grid_hierarchy(opt.countries, opt.states, opt.cities)
                             : geo::load_and_validate_hierarchy(run.input(opt.hierarchy));
  corpus::SyntheticOptions so;
  so.vocab_size = opt.synth_vocab;
  so.tweets_per_city = opt.tweets_per_city;
  so.tweet_len = opt.tweet_len;
  so.state_drift = opt.state_drift;
  so.city_drift = opt.city_drift;
  so.seed = opt.seed;
  so.tweets_per_user = opt.tweets_per_user;
  corpus::write_jsonl(corpus::generate_synthetic_corpus(hierarchy, so),
                      run.output("synthetic.jsonl"));
  geo::save_hierarchy(hierarchy, run.output("hierarchy.csv"));
}

void cmd_train(Run& run) {
  const auto& opt = run.opt;
  auto train = corpus::read_jsonl(run.input(opt.train));
  std::vector<TweetRecord> dev;
  if (!opt.dev.empty()) dev = corpus::read_jsonl(run.input(opt.dev));
  const auto vocab = vocab_from({&train}, opt.min_count);
  encode_all(train, vocab, opt.max_len);
  encode_all(dev, vocab, opt.max_len);

  auto spec = spec_from(opt);
  spec.vocab_size = vocab.size();
  const auto classes = classes_for(run, spec.tasks(), {&train, &dev});
  for (const auto& [task, names] : classes) spec.class_counts[task] = names.size();

  const auto train_ex = training::make_examples(train, classes);
  const auto dev_ex = training::make_examples(dev, classes);
  models::Model model(spec, opt.seed);
  const auto result = training::train(model, train_ex, dev_ex, train_config_from(opt, spec));
  write_history(run, "history.csv", result.history);
  save_model(run, model, vocab, classes, result);
}

void cmd_selftrain(Run& run) {
  const auto& opt = run.opt;
  auto [vocab, ckpt] = load_model(run);
  const auto labeled = corpus::read_jsonl(run.input(opt.train));
  const auto pool = corpus::read_jsonl(run.input(opt.pool));
  training::SelfTrainConfig cfg;
  if (opt.mode == "class_agnostic") {
    cfg.mode = training::SelfTrainMode::kClassAgnostic;
  } else if (opt.mode == "class_specific") {
    cfg.mode = training::SelfTrainMode::kClassSpecific;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + opt.mode + "'");
  }
  cfg.top_pct = opt.top_pct;
  if (opt.min_tokens > 0) cfg.min_tokens = opt.min_tokens;
  cfg.require_zero_diacritics = opt.zero_diacritics;
  cfg.replies_only = opt.replies_only;
  cfg.task = ckpt.model.spec().is_multi_task() ? parse_or(parse_task(opt.task), "task", opt.task)
                                               : ckpt.model.spec().task;
  auto pseudo = training::self_train_select(ckpt.model, pool, cfg, vocab, ckpt.meta.classes);
  corpus::write_jsonl(pseudo, run.output("pseudo.jsonl"));
  corpus::write_jsonl(training::augment(labeled, pseudo), run.output("augmented_train.jsonl"));
}

void cmd_weak(Run& run) {
  const auto& opt = run.opt;
  const auto regime = parse_or(training::parse_weak_regime(opt.regime), "regime", opt.regime);
  auto weak = corpus::read_jsonl(run.input(opt.weak));
  std::vector<TweetRecord> gold, dev;
  if (!opt.gold.empty()) gold = corpus::read_jsonl(run.input(opt.gold));
  if (!opt.dev.empty()) dev = corpus::read_jsonl(run.input(opt.dev));
  // The vocabulary covers only the data the regime trains on.
  const auto vocab = regime == training::WeakRegime::kWeak ? vocab_from({&weak}, opt.min_count)
                                                           : vocab_from({&weak, &gold}, opt.min_count);
  for (auto* set : {&weak, &gold, &dev}) encode_all(*set, vocab, opt.max_len);

  auto spec = spec_from(opt);
  spec.vocab_size = vocab.size();
  const auto classes = classes_for(run, spec.tasks(), {&weak, &gold, &dev});
  for (const auto& [task, names] : classes) spec.class_counts[task] = names.size();
  const auto weak_ex = training::make_examples(weak, classes);
  const auto gold_ex = training::make_examples(gold, classes);
  const auto dev_ex = training::make_examples(dev, classes);
  const auto result = training::run_weak_regime(regime, weak_ex, gold_ex, dev_ex, spec, opt.seed,
                                                train_config_from(opt, spec));
  write_history(run, "history.csv", result.phase1.history);
  if (result.phase2) write_history(run, "history_phase2.csv", result.phase2->history);
  save_model(run, result.model, vocab, classes, result.phase2 ? *result.phase2 : result.phase1);
}

void cmd_eval(Run& run) {
  const auto& opt = run.opt;
  auto [vocab, ckpt] = load_model(run);
  auto records = corpus::read_jsonl(run.input(opt.input));
  encode_all(records, vocab, ckpt.model.spec().max_len);
  const auto examples = training::make_examples(records, ckpt.meta.classes);
  json all;
  for (auto& [task, report] : training::evaluate(ckpt.model, examples)) {
    const auto& names = ckpt.meta.classes.at(task);
    report.classes = names;
    for (std::size_t c = 0; c < names.size(); ++c) report.per_class[c].label = names[c];
    std::ofstream csv(run.output("metrics_" + std::string(task_name(task)) + ".csv"),
                      std::ios::binary);
    eval::write_metrics_csv(report, csv);
    all[std::string(task_name(task))] = eval::metrics_json(report);
  }
  if (!opt.train.empty()) {
    // Majority-class baseline fitted on the given training file.
    const auto train = corpus::read_jsonl(run.input(opt.train));
    json baseline;
    for (const auto& [task, names] : ckpt.meta.classes) {
      std::vector<std::string> train_labels, gold;
      for (const auto& r : train) {
        if (r.labels && !r.labels->get(task).empty()) train_labels.push_back(r.labels->get(task));
      }
      for (const auto& r : records) {
        if (r.labels && !r.labels->get(task).empty()) gold.push_back(r.labels->get(task));
      }
      if (train_labels.empty() || gold.empty()) continue;
      const auto predictor = eval::majority_baseline(train_labels);
      const std::vector<std::string> guess(gold.size(), predictor.predict());
      auto report = eval::metrics_json(eval::compute_metrics(gold, guess, names));
      report["label"] = predictor.label;
      baseline[std::string(task_name(task))] = report;
    }
    all["baseline"] = baseline;
  }
  std::ofstream(run.output("metrics.json")) << all.dump(2) << '\n';
}

void cmd_usereval(Run& run) {
  const auto& opt = run.opt;
  auto [vocab, ckpt] = load_model(run);
  auto records = corpus::read_jsonl(run.input(opt.input));
  encode_all(records, vocab, ckpt.model.spec().max_len);
  const auto& spec = ckpt.model.spec();
  const Task task =
      spec.is_multi_task() ? parse_or(parse_task(opt.task), "task", opt.task) : spec.task;
  const auto& names = ckpt.meta.classes.at(task);

  std::vector<models::Example> examples;
  for (const auto& r : records) examples.push_back({r.tweet_id, r.token_ids, r.mask_len});
  const auto preds = training::predict(ckpt.model, examples).at(task);

  std::vector<eval::UserCase> users;
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto [it, fresh] = slot.emplace(r.user_id, users.size());
    if (fresh) users.push_back({r.user_id, "", {}});
    auto& u = users[it->second];
    if (u.gold.empty() && r.labels) u.gold = r.labels->get(task);
    u.votes.push_back({names.at(preds[i].label), preds[i].confidence});
  }
  std::erase_if(users, [](const eval::UserCase& u) { return u.gold.empty(); });
  const auto rows = eval::user_level_sweep(users, opt.ns, opt.thresholds, names);
  std::ofstream table(run.output("usereval.csv"), std::ios::binary);
  eval::write_usereval_csv(rows, table);
  std::ofstream best(run.output("usereval_best.csv"), std::ios::binary);
  eval::write_usereval_best_csv(rows, best);
}

// --- option wiring -------------------------------------------------------

void add_model_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--model", o.model, "single|gru500|mtl-common|mtl-spec|hamtl");
  cmd->add_option("--task", o.task, "city|state|country");
  cmd->add_option("--order", o.order, "city_first|country_first");
  cmd->add_option("--dropout", o.dropout, "dropout rate (default per architecture)");
  cmd->add_option("--heads", o.heads);
  cmd->add_option("--embed-dim", o.embed_dim);
  cmd->add_option("--hidden", o.hidden, "GRU units per direction");
  cmd->add_option("--max-len", o.max_len);
  cmd->add_option("--min-count", o.min_count, "vocabulary frequency cutoff");
  cmd->add_option("--hierarchy", o.hierarchy, "location hierarchy CSV for class lists");
  cmd->add_option("--epochs", o.epochs);
  cmd->add_option("--patience", o.patience);
  cmd->add_option("--batch-size", o.batch_size);
  cmd->add_option("--lr", o.lr);
  cmd->add_option("--selection", o.selection, "auto|task|mean");
}

void add_checkpoint_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--checkpoint", o.checkpoint)->required();
  cmd->add_option("--vocab", o.vocab)->required();
}

// Turns key=value lines into flags placed ahead of the command line, skipping
// keys the command line already sets so that flags win.
std::vector<std::string> config_args(const std::string& path,
                                     const std::vector<std::string>& cli_args) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config " + path);
  std::set<std::string> given;
  for (const auto& a : cli_args) {
    if (a.starts_with("--")) given.insert(a.substr(2, a.find('=') - 2));
  }
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw Error(ErrorCode::kParseError, "config line without '=': " + line);
      }
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string value = trim(line.substr(eq + 1));
    if (key == "config" || given.count(key)) continue;
    std::istringstream words(value);
    std::vector<std::string> parts{std::istream_iterator<std::string>(words), {}};
    if (parts.size() <= 1) {
      out.push_back("--" + key + "=" + value);
    } else {
      out.push_back("--" + key);
      out.insert(out.end(), parts.begin(), parts.end());
    }
  }
  return out;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  if (const char* env = std::getenv(kOutDirEnv)) o.out_dir = env;
  if (o.out_dir.empty()) o.out_dir = "hamtl_out";

  CLI::App app{"hamtl: hierarchical multi-task location classification for tweets"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::string config;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed);
    cmd->add_option("--config", config, "key=value file; flags override it");
  };

  auto* pre = app.add_subcommand("preprocess", "clean a JSONL corpus into tokenized records");
  pre->add_option("--input", o.input)->required();
  pre->add_flag("--keep-diacritics", o.keep_diacritics);

  auto* split = app.add_subcommand("split", "split a corpus into TRAIN/DEV/TEST");
  split->add_option("--input", o.input)->required();
  split->add_option("--ratios", o.ratios)->expected(3);
  split->add_option("--cap", o.cap, "TRAIN tweets kept per country");
  split->add_flag("--user-disjoint", o.user_disjoint);

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--hierarchy", o.hierarchy, "hierarchy CSV (default: a regular grid)");
  synth->add_option("--countries", o.countries);
  synth->add_option("--states", o.states, "states per country");
  synth->add_option("--cities", o.cities, "cities per state");
  synth->add_option("--vocab-size", o.synth_vocab);
  synth->add_option("--tweets-per-city", o.tweets_per_city);
  synth->add_option("--tweet-len", o.tweet_len);
  synth->add_option("--tweets-per-user", o.tweets_per_user);
  synth->add_option("--state-drift", o.state_drift);
  synth->add_option("--city-drift", o.city_drift);

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--train", o.train)->required();
  train->add_option("--dev", o.dev);
  add_model_options(train, o);

  auto* self = app.add_subcommand("selftrain", "one self-training augmentation round");
  add_checkpoint_options(self, o);
  self->add_option("--train", o.train, "labeled TRAIN to augment")->required();
  self->add_option("--pool", o.pool, "unlabeled tweets")->required();
  self->add_option("--mode", o.mode, "class_agnostic|class_specific");
  self->add_option("--top-pct", o.top_pct);
  self->add_option("--min-tokens", o.min_tokens);
  self->add_flag("--zero-diacritics", o.zero_diacritics);
  self->add_flag("--replies-only", o.replies_only);
  self->add_option("--task", o.task, "head whose confidence ranks the pool");

  auto* weak = app.add_subcommand("weak", "train under a weak-supervision regime");
  weak->add_option("--regime", o.regime, "weak|weak_plus_gold|weak_then_gold");
  weak->add_option("--weak", o.weak)->required();
  weak->add_option("--gold", o.gold);
  weak->add_option("--dev", o.dev);
  add_model_options(weak, o);

  auto* ev = app.add_subcommand("eval", "tweet-level metrics");
  add_checkpoint_options(ev, o);
  ev->add_option("--input", o.input)->required();
  ev->add_option("--train", o.train, "TRAIN file for the majority baseline");

  auto* user = app.add_subcommand("usereval", "user-level thresholded voting sweep");
  add_checkpoint_options(user, o);
  user->add_option("--input", o.input)->required();
  user->add_option("--task", o.task);
  user->add_option("--n", o.ns, "tweets per user");
  user->add_option("--thresholds", o.thresholds);

  const std::map<CLI::App*, void (*)(Run&)> handlers = {
      {pre, cmd_preprocess}, {split, cmd_split}, {synth, cmd_synth},   {train, cmd_train},
      {self, cmd_selftrain}, {weak, cmd_weak},   {ev, cmd_eval},       {user, cmd_usereval}};
  for (const auto& [cmd, fn] : handlers) common(cmd);

  try {
    std::vector<std::string> argv = args;
    // Locate --config before the real parse so its entries can precede flags.
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      if (args[i].starts_with("--config=")) path = args[i].substr(9);
      if (path.empty()) continue;
      const auto extra = config_args(path, args);
      argv.insert(argv.begin() + 1, extra.begin(), extra.end());
      break;
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUserError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUserError;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    Run run{o, o.out_dir, json::object(), {}};
    fs::create_directories(run.out);
    handlers.at(cmd)(run);

    json manifest;
    manifest["command"] = cmd->get_name();
    manifest["seed"] = o.seed;
    json cfg = json::object();
    for (const CLI::Option* opt : cmd->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name() == "--config" ||
          opt->get_name() == "--out") {
        continue;
      }
      const auto res = opt->results();
      std::string value;
      for (const auto& r : res) value += (value.empty() ? "" : " ") + r;
      cfg[opt->get_name().substr(2)] = res.empty() ? opt->get_default_str() : value;
    }
    manifest["config"] = cfg;
    manifest["inputs"] = run.inputs;
    manifest["outputs"] = run.outputs;
    std::ofstream(run.out / "manifest.json") << manifest.dump(2) << '\n';
    out << cmd->get_name() << ": wrote " << run.outputs.size() << " artifacts to "
        << run.out.string() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUserError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUserError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternalError;
  }
}

}  // namespace hamtl::cli
