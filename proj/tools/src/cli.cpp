#include "navqa/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "navqa/ablation.hpp"
#include "navqa/biasprobe.hpp"
#include "navqa/error.hpp"
#include "navqa/serialization.hpp"
#include "navqa/vocabulary.hpp"

#ifndef NAVQA_VERSION
#define NAVQA_VERSION "0.0.0"
#endif

namespace navqa::cli {

namespace {

const char* const kSplitFiles[] = {"train", "val_seen", "val_unseen"};

std::string where(std::string_view text, std::string_view name, std::string_view key) {
  const int line = line_of_key(text, key);
  return std::string(name) + (line > 0 ? ":" + std::to_string(line) : std::string());
}

template <class F>
auto section(std::string_view text, std::string_view name, std::string_view key, F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConfigError) throw;
    fail(ErrorCode::ConfigError, where(text, name, key) + ": [" + std::string(key) + "] " + e.what());
  } catch (const Json::exception& e) {
    fail(ErrorCode::ConfigError, where(text, name, key) + ": [" + std::string(key) + "] " + e.what());
  }
}

bool known_split(std::string_view s) { return s == "train" || s == "val_seen" || s == "val_unseen"; }

std::string default_baseline(ModelKind kind) {
  return std::string(is_nav_model(kind) ? kRandomForward : kMajority);
}

/// Throws ConfigError when the episodes cannot drive the model kind.
void check_compatible(ModelKind kind, std::span<const Episode> episodes, std::string_view what) {
  require(!episodes.empty(), ErrorCode::EmptyDataset, std::string(what) + " is empty");
  for (const auto& e : episodes) {
    if (is_nav_model(kind)) {
      require(e.goal.has_value() && !e.gold_actions.empty(), ErrorCode::ConfigError,
              "model " + std::string(to_string(kind)) + " needs navigation episodes; " +
                  std::string(what) + " episode " + std::to_string(e.episode_id) +
                  " has no goal trajectory");
    } else {
      require(e.answer.has_value(), ErrorCode::ConfigError,
              "model " + std::string(to_string(kind)) + " needs question episodes; " +
                  std::string(what) + " episode " + std::to_string(e.episode_id) + " has no answer");
    }
  }
}

class Outputs {
 public:
  Outputs(fs::path dir, RunManifest& m) : dir_(std::move(dir)), m_(m) { fs::create_directories(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void text(const std::string& name, std::string_view content) {
    write_text_file(dir_ / name, content);
    m_.outputs[name] = sha256_hex(content);
  }

  /// Records a file some other writer produced.
  void existing(const std::string& name) { m_.outputs[name] = file_sha256(dir_ / name); }

  void finish(std::chrono::steady_clock::time_point t0) {
    m_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text_file(dir_ / "manifest.json", manifest_to_json(m_).dump(2) + "\n");
  }

 private:
  fs::path dir_;
  RunManifest& m_;
};

RunManifest start(std::string command, const ExperimentConfig* cfg, std::span<const fs::path> inputs) {
  RunManifest m;
  m.command = std::move(command);
  m.version = NAVQA_VERSION;
  Json resolved = cfg ? experiment_to_json(*cfg) : Json::object();
  if (cfg) m.seed = cfg->seed;
  m.config = resolved;
  for (const auto& p : inputs) m.inputs[p.string()] = file_sha256(p);
  m.config_hash = config_hash(resolved, inputs);
  return m;
}

std::vector<EpisodeResult> eval_nav_agent(const AgentFactory& factory, const Dataset& d,
                                          const ExperimentConfig& cfg) {
  std::vector<EpisodeResult> out;
  for (const auto& s : cfg.splits) {
    auto r = evaluate_nav(factory, d.worlds, d.split(s), s, cfg.rollout, cfg.seed, cfg.train.jobs);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

std::vector<EpisodeResult> eval_model(const AblatedModel& ab, const Dataset& d, const ExperimentConfig& cfg) {
  if (is_nav_model(ab.model->config.kind))
    return eval_nav_agent([&ab] { return make_policy_agent(ab); }, d, cfg);
  std::vector<EpisodeResult> out;
  for (const auto& s : cfg.splits) {
    auto r = qa_evaluate(ab, d.worlds, d.split(s), s, cfg.train.jobs);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

std::vector<EpisodeResult> eval_baseline(std::string_view name, const Dataset& d, const ExperimentConfig& cfg) {
  const bool nav = is_nav_model(cfg.model.kind);
  if (name == kMajority) {
    require(!nav, ErrorCode::ConfigError, "majority baseline needs a QA model config");
    const auto maj = majority_baseline(d.train);
    std::vector<EpisodeResult> out;
    for (const auto& s : cfg.splits) {
      auto r = qa_evaluate(maj, d.split(s), s);
      out.insert(out.end(), r.begin(), r.end());
    }
    return out;
  }
  require(nav, ErrorCode::ConfigError, std::string(name) + " baseline needs a navigation model config");
  if (name == kRandomForward) return eval_nav_agent(make_random_forward_agent, d, cfg);
  if (name == kRandom100) return eval_nav_agent(make_random_100_agent, d, cfg);
  fail(ErrorCode::ConfigError, "unknown baseline '" + std::string(name) + "'");
}

LoadedModel load_checked(const fs::path& path, const ExperimentConfig& cfg) {
  auto loaded = load_model(path);
  require(model_config_to_json(loaded.model.config) == model_config_to_json(cfg.model),
          ErrorCode::ConfigError,
          path.string() + ": checkpoint model config does not match the experiment config");
  require(parse_variant(loaded.variant).has_value(), ErrorCode::FormatError,
          path.string() + ": unknown variant '" + loaded.variant + "'");
  return loaded;
}

std::string summary_line(const std::vector<EpisodeResult>& r, bool nav) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s %.4f n=%zu", nav ? "success" : "accuracy",
                nav ? success_rate(r) : accuracy(r), r.size());
  return buf;
}

}  // namespace

// --------------------------------------------------------------------------
// Config
// --------------------------------------------------------------------------

ExperimentConfig parse_experiment(std::string_view text, std::string_view name,
                                  const ConfigOverrides& overrides) {
  const Json j = parse_json_text(text, name);
  require(j.is_object(), ErrorCode::ConfigError, std::string(name) + ": config must be a JSON object");
  static const std::set<std::string> known = {"seed", "data", "model", "train", "eval"};
  for (const auto& [k, v] : j.items())
    require(known.count(k) > 0, ErrorCode::ConfigError,
            where(text, name, k) + ": unknown key '" + k + "'");

  ExperimentConfig c;
  c.seed = section(text, name, "seed", [&] { return j.value("seed", std::uint64_t{0}); });
  if (overrides.seed) c.seed = *overrides.seed;

  Json data = j.value("data", Json::object());
  Json train = j.value("train", Json::object());
  require(data.is_object() && train.is_object(), ErrorCode::ConfigError,
          std::string(name) + ": data and train must be objects");
  require(!data.contains("seed"), ErrorCode::ConfigError,
          where(text, name, "seed") + ": set seed at the top level");
  require(!train.contains("seed"), ErrorCode::ConfigError,
          where(text, name, "seed") + ": set seed at the top level");
  data["seed"] = c.seed;
  train["seed"] = c.seed;
  if (overrides.forcing) train["forcing"] = *overrides.forcing;
  if (overrides.jobs) train["jobs"] = *overrides.jobs;

  c.data = section(text, name, "data", [&] {
    GenSpec s = genspec_from_json(data, text);
    s.validate();
    return s;
  });
  c.model = section(text, name, "model", [&] {
    ModelConfig m = model_config_from_json(j.value("model", Json::object()));
    m.validate();
    return m;
  });
  c.train = section(text, name, "train", [&] {
    TrainConfig t = train_config_from_json(train);
    t.validate();
    return t;
  });

  section(text, name, "eval", [&] {
    const Json e = j.value("eval", Json::object());
    require(e.is_object(), ErrorCode::ConfigError, "eval must be an object");
    for (const auto& [k, v] : e.items()) {
      if (k == "max_steps") {
        c.rollout.max_steps = v.get<int>();
        require(c.rollout.max_steps > 0, ErrorCode::ConfigError, "max_steps must be positive");
      } else if (k == "success_radius") {
        c.rollout.success_radius = v.get<double>();
        require(c.rollout.success_radius >= 0, ErrorCode::ConfigError, "success_radius must be >= 0");
      } else if (k == "baseline") {
        c.baseline = v.get<std::string>();
        require(c.baseline == kRandomForward || c.baseline == kRandom100 || c.baseline == kMajority,
                ErrorCode::ConfigError, "unknown baseline '" + c.baseline + "'");
      } else if (k == "splits") {
        c.splits = v.get<std::vector<std::string>>();
        require(!c.splits.empty(), ErrorCode::ConfigError, "splits must not be empty");
        for (const auto& s : c.splits)
          require(known_split(s), ErrorCode::ConfigError, "unknown split '" + s + "'");
      } else {
        fail(ErrorCode::ConfigError, "unknown key '" + k + "'");
      }
    }
    return 0;
  });
  if (c.baseline.empty()) c.baseline = default_baseline(c.model.kind);
  require(is_nav_model(c.model.kind) == (c.baseline != kMajority), ErrorCode::ConfigError,
          std::string(name) + ": baseline " + c.baseline + " does not fit model " +
              std::string(to_string(c.model.kind)));
  return c;
}

ExperimentConfig load_experiment(const fs::path& path, const ConfigOverrides& overrides) {
  return parse_experiment(read_text_file(path), path.string(), overrides);
}

Json experiment_to_json(const ExperimentConfig& c) {
  return Json{{"seed", c.seed},
              {"data", genspec_to_json(c.data)},
              {"model", model_config_to_json(c.model)},
              {"train", train_config_to_json(c.train)},
              {"eval",
               {{"max_steps", c.rollout.max_steps},
                {"success_radius", c.rollout.success_radius},
                {"baseline", c.baseline},
                {"splits", c.splits}}}};
}

// --------------------------------------------------------------------------
// Hashing and manifests
// --------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::FormatError, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_text_file(path)); }

std::string config_hash(const Json& resolved, std::span<const fs::path> inputs) {
  std::string material = resolved.dump();
  for (const auto& p : inputs) material += "\n" + p.filename().string() + " " + file_sha256(p);
  return sha256_hex(material);
}

Json manifest_to_json(const RunManifest& m) {
  auto strings = [](const std::vector<fs::path>& ps) {
    Json a = Json::array();
    for (const auto& p : ps) a.push_back(p.string());
    return a;
  };
  return Json{{"tool", "navqa"},
              {"version", m.version},
              {"command", m.command},
              {"config_hash", m.config_hash},
              {"seed", m.seed},
              {"config", m.config},
              {"datasets", strings(m.datasets)},
              {"checkpoints", strings(m.checkpoints)},
              {"inputs", m.inputs},
              {"outputs", m.outputs},
              {"summary", m.summary},
              {"timing", {{"seconds", m.seconds}}}};
}

// --------------------------------------------------------------------------
// Datasets
// --------------------------------------------------------------------------

const std::vector<Episode>& Dataset::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "val_seen") return val_seen;
  if (name == "val_unseen") return val_unseen;
  fail(ErrorCode::ConfigError, "unknown split '" + std::string(name) + "'");
}

std::vector<fs::path> dataset_files(const fs::path& dir) {
  std::vector<fs::path> out = {dir / "worlds.jsonl"};
  for (const char* s : kSplitFiles) out.push_back(dir / (std::string(s) + ".jsonl"));
  out.push_back(dir / "vocab.txt");
  return out;
}

Dataset load_dataset(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::ConfigError, "no dataset directory " + dir.string());
  require(Vocabulary::load(dir / "vocab.txt") == Vocabulary::builtin(), ErrorCode::FormatError,
          (dir / "vocab.txt").string() + " does not match the built-in vocabulary");
  Dataset d;
  d.worlds = read_worlds(dir / "worlds.jsonl");
  d.train = read_episodes(dir / "train.jsonl");
  d.val_seen = read_episodes(dir / "val_seen.jsonl");
  d.val_unseen = read_episodes(dir / "val_unseen.jsonl");
  return d;
}

// --------------------------------------------------------------------------
// Commands
// --------------------------------------------------------------------------

RunManifest cmd_gen(const GenOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_experiment(o.config, o.overrides);
  const std::vector<fs::path> inputs = {o.config};
  RunManifest m = start("gen", &cfg, inputs);
  Outputs out(o.out, m);

  const auto data = generate_dataset(cfg.data);
  std::vector<Json> rows;
  for (const auto& w : data.worlds) rows.push_back(world_to_json(w));
  out.text("worlds.jsonl", to_jsonl(rows));
  const std::vector<Episode>* splits[] = {&data.splits.train, &data.splits.val_seen,
                                          &data.splits.val_unseen};
  for (int i = 0; i < 3; ++i) {
    rows.clear();
    for (const auto& e : *splits[i]) rows.push_back(episode_to_json(e));
    out.text(std::string(kSplitFiles[i]) + ".jsonl", to_jsonl(rows));
    m.summary[kSplitFiles[i]] = splits[i]->size();
  }
  Vocabulary::builtin().save(out.path("vocab.txt"));
  out.existing("vocab.txt");
  m.summary["worlds"] = data.worlds.size();
  m.datasets = dataset_files(o.out);
  std::printf("gen: %zu worlds, %zu train / %zu val_seen / %zu val_unseen episodes -> %s\n",
              data.worlds.size(), data.splits.train.size(), data.splits.val_seen.size(),
              data.splits.val_unseen.size(), o.out.string().c_str());
  out.finish(t0);
  return m;
}

RunManifest cmd_train(const TrainOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_experiment(o.config, o.overrides);
  const auto variant = parse_variant(o.variant);
  require(variant.has_value(), ErrorCode::ConfigError,
          "unknown variant '" + o.variant + "' (expected full, a, av or al)");
  const auto d = load_dataset(o.data);
  check_compatible(cfg.model.kind, d.train, "train split");

  std::vector<fs::path> inputs = {o.config};
  for (const auto& p : dataset_files(o.data)) inputs.push_back(p);
  RunManifest m = start("train", &cfg, inputs);
  m.datasets = dataset_files(o.data);
  Outputs out(o.out, m);

  Model model = make_model(cfg.model, cfg.seed);
  const auto ab = apply_ablation(model, AblationSpec{*variant});
  const bool nav = is_nav_model(cfg.model.kind);

  EpochHook hook = [&](int epoch, const Model&) {
    std::vector<Json> rows;
    for (const char* s : {"val_seen", "val_unseen"}) {
      if (d.split(s).empty()) continue;
      double metric = 0.0;
      if (nav) {
        ExperimentConfig one = cfg;
        one.splits = {s};
        metric = success_rate(eval_nav_agent([&ab] { return make_policy_agent(ab); }, d, one));
      } else {
        metric = accuracy(qa_evaluate(ab, d.worlds, d.split(s), s, cfg.train.jobs));
      }
      rows.push_back(Json{{"epoch", epoch}, {"split", s}, {"metric", metric}});
      std::printf("  epoch %d %s %.4f\n", epoch, s, metric);
    }
    return rows;
  };

  std::printf("train: %s/%s, %s forcing, %d epochs, %zu params, %zu episodes\n",
              std::string(to_string(cfg.model.kind)).c_str(), o.variant.c_str(),
              std::string(to_string(cfg.train.forcing)).c_str(), cfg.train.epochs, count_params(model),
              d.train.size());
  TrainResult result = nav ? train_nav(model, ab.encoder, d.worlds, d.train, cfg.train, hook)
                           : train_qa(model, ab.spec.masks(), d.worlds, d.train, cfg.train, hook);

  save_model(out.path("model.json"), model, to_string(*variant));
  out.existing("model.json");
  out.existing("model.json.bin");
  m.checkpoints = {out.path("model.json")};
  out.text("train_log.jsonl", to_jsonl(result.log));
  std::vector<Json> visited;
  for (const auto& [w, x, y, h, t] : result.visited.states) visited.push_back(Json::array({w, x, y, h, t}));
  out.text("visited_states.jsonl", to_jsonl(visited));

  m.summary["variant"] = to_string(*variant);
  m.summary["forcing"] = to_string(cfg.train.forcing);
  m.summary["params"] = count_params(model);
  m.summary["visited_states"] = result.visited.states.size();
  for (auto it = result.log.rbegin(); it != result.log.rend(); ++it) {
    const auto split = (*it)["split"].get<std::string>();
    if (!m.summary.contains("final_" + split)) m.summary["final_" + split] = (*it)["metric"];
  }
  out.finish(t0);
  return m;
}

RunManifest cmd_eval(const EvalOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  require(o.checkpoint.has_value() != o.baseline.has_value(), ErrorCode::ConfigError,
          "eval needs exactly one of --checkpoint or --variant <baseline>");
  const auto cfg = load_experiment(o.config, o.overrides);
  const auto d = load_dataset(o.data);
  std::vector<fs::path> inputs = {o.config};
  for (const auto& p : dataset_files(o.data)) inputs.push_back(p);
  if (o.checkpoint) {
    inputs.push_back(*o.checkpoint);
    inputs.push_back(fs::path(o.checkpoint->string() + ".bin"));
  }
  RunManifest m = start("eval", &cfg, inputs);
  m.datasets = dataset_files(o.data);
  Outputs out(o.out, m);

  std::vector<EpisodeResult> results;
  std::string name;
  for (const auto& s : cfg.splits) check_compatible(cfg.model.kind, d.split(s), s);
  if (o.checkpoint) {
    auto loaded = load_checked(*o.checkpoint, cfg);
    m.checkpoints = {*o.checkpoint};
    const auto ab = apply_ablation(loaded.model, AblationSpec{*parse_variant(loaded.variant)});
    results = eval_model(ab, d, cfg);
    name = loaded.variant;
  } else {
    results = eval_baseline(*o.baseline, d, cfg);
    name = *o.baseline;
  }
  out.text("results.json", results_to_json_text(results));
  const bool nav = is_nav_model(cfg.model.kind);
  m.summary["variant"] = name;
  m.summary["episodes"] = results.size();
  std::printf("eval: %s %s\n", name.c_str(), summary_line(results, nav).c_str());
  out.finish(t0);
  return m;
}

RunManifest cmd_ablate(const AblateOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_experiment(o.config, o.overrides);
  const auto d = load_dataset(o.data);
  for (const auto& s : cfg.splits) check_compatible(cfg.model.kind, d.split(s), s);
  std::vector<fs::path> inputs = {o.config};
  for (const auto& p : dataset_files(o.data)) inputs.push_back(p);

  std::vector<std::pair<Variant, fs::path>> ckpts;
  for (const auto& p : o.checkpoints) {
    auto loaded = load_checked(p, cfg);
    const Variant v = *parse_variant(loaded.variant);
    for (const auto& [seen, path] : ckpts)
      require(seen != v, ErrorCode::ConfigError,
              "variant " + loaded.variant + " given twice: " + path.string() + ", " + p.string());
    ckpts.emplace_back(v, p);
  }
  std::sort(ckpts.begin(), ckpts.end());
  for (const auto& [v, p] : ckpts) {
    inputs.push_back(p);
    inputs.push_back(fs::path(p.string() + ".bin"));
  }
  RunManifest m = start("ablate", &cfg, inputs);
  m.datasets = dataset_files(o.data);
  Outputs out(o.out, m);

  const bool nav = is_nav_model(cfg.model.kind);
  std::vector<EpisodeResult> results;
  for (const auto& [v, p] : ckpts) {
    auto loaded = load_checked(p, cfg);
    m.checkpoints.push_back(p);
    const auto ab = apply_ablation(loaded.model, AblationSpec{v});
    auto r = eval_model(ab, d, cfg);
    std::printf("ablate: %-14s %s\n", std::string(to_string(v)).c_str(), summary_line(r, nav).c_str());
    results.insert(results.end(), r.begin(), r.end());
  }
  const std::vector<std::string_view> baselines =
      nav ? std::vector<std::string_view>{kRandomForward, kRandom100} : std::vector<std::string_view>{kMajority};
  for (auto b : baselines) {
    auto r = eval_baseline(b, d, cfg);
    std::printf("ablate: %-14s %s\n", std::string(b).c_str(), summary_line(r, nav).c_str());
    results.insert(results.end(), r.begin(), r.end());
  }

  const auto table = aggregate(results, nav ? TableKind::Nav : TableKind::QA, cfg.baseline);
  out.text("results.json", results_to_json_text(results));
  out.text("table.csv", table_to_csv(table));
  out.text("table.json", table_to_json(table).dump(2) + "\n");
  m.summary["episodes"] = results.size();
  m.summary["baseline"] = cfg.baseline;
  std::fputs(table_to_csv(table).c_str(), stdout);
  out.finish(t0);
  return m;
}

RunManifest cmd_analyze(const AnalyzeOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = load_dataset(o.data);
  std::vector<Episode> episodes;
  if (o.split == "all") {
    for (const char* s : kSplitFiles) episodes.insert(episodes.end(), d.split(s).begin(), d.split(s).end());
  } else {
    episodes = d.split(o.split);
  }
  const auto inputs = dataset_files(o.data);
  RunManifest m = start("analyze", nullptr, inputs);
  m.datasets = inputs;
  Outputs out(o.out, m);

  const auto trajectories = gold_trajectories(episodes);
  const auto report = report_bias(episodes, trajectories);
  require(report.nav || report.answers, ErrorCode::EmptyDataset,
          "split " + o.split + " has neither gold trajectories nor answers");
  Json j = report_to_json(report);
  j["split"] = o.split;
  j["episodes"] = episodes.size();
  out.text("bias_report.json", j.dump(2) + "\n");
  if (report.nav) {
    out.text("transitions.csv", transition_to_csv(*report.nav));
    std::printf("analyze: %ld action transitions\n", report.nav->samples);
  }
  if (report.answers) {
    out.text("answers.csv", answers_to_csv(*report.answers));
    std::printf("analyze: majority-by-type rate %.4f\n", report.answers->majority_rate);
    for (const auto& g : report.answers->by_template)
      std::printf("  %-24s n=%-6ld majority %-8s %.4f chance %.4f\n", g.template_name.c_str(), g.total,
                  std::string(answer_name(g.majority_answer)).c_str(), g.majority_proportion,
                  g.question_type ? chance_rate(*g.question_type) : 0.0);
  }
  m.summary["episodes"] = episodes.size();
  out.finish(t0);
  return m;
}

std::string table_to_markdown(const ResultTable& t) {
  std::string out = "| |";
  for (const auto& c : t.columns) out += " " + c + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += "---:|";
  out += "\n";
  for (const auto& row : t.rows) {
    out += "| " + (row == kBaselineRow ? std::string(kBaselineRow) + " (" + t.baseline + ")" : row) + " |";
    const auto flagged = t.better_than_full.find(row);
    for (const auto& c : t.columns) {
      auto cell = t.cell(row, c);
      char buf[64] = "";
      if (cell) std::snprintf(buf, sizeof buf, "%.2f", cell->value);
      std::string v = buf;
      if (flagged != t.better_than_full.end() &&
          std::find(flagged->second.begin(), flagged->second.end(), c) != flagged->second.end())
        v += "*";
      if (row == kDeltaRow && std::find(t.best_unimodal_beats_baseline.begin(),
                                        t.best_unimodal_beats_baseline.end(), c) !=
                                  t.best_unimodal_beats_baseline.end())
        v += " +";
      out += " " + v + " |";
    }
    out += "\n";
  }
  out += "\n`*` unimodal row better than Full. `+` best unimodal row better than the baseline.\n";
  return out;
}

RunManifest cmd_report(const ReportOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  require(!o.results.empty(), ErrorCode::ConfigError, "report needs at least one --results file");
  std::vector<fs::path> inputs;
  for (const auto& p : o.results) inputs.push_back(fs::is_directory(p) ? p / "results.json" : p);
  RunManifest m = start("report", nullptr, inputs);
  Outputs out(o.out, m);

  std::vector<EpisodeResult> results;
  for (const auto& p : inputs) {
    const Json j = read_json_file(p);
    require(j.is_array(), ErrorCode::FormatError, p.string() + ": expected a JSON array of results");
    for (const auto& r : j) results.push_back(result_from_json(r));
  }
  require(!results.empty(), ErrorCode::EmptyDataset, "no results to report");
  const bool qa = std::any_of(results.begin(), results.end(), [](const auto& r) { return r.answer.has_value(); });
  const std::string baseline =
      o.baseline.value_or(std::string(qa ? kMajority : kRandomForward));
  const auto table = aggregate(results, qa ? TableKind::QA : TableKind::Nav, baseline);
  out.text("table.csv", table_to_csv(table));
  out.text("table.json", table_to_json(table).dump(2) + "\n");
  out.text("table.md", table_to_markdown(table));
  m.summary["episodes"] = results.size();
  m.summary["baseline"] = baseline;
  std::fputs(table_to_markdown(table).c_str(), stdout);
  out.finish(t0);
  return m;
}

// --------------------------------------------------------------------------
// Entry point
// --------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"navqa: gridworld navigation and question answering with unimodal ablations"};
  app.set_version_flag("--version", NAVQA_VERSION);
  app.require_subcommand(1);

  GenOptions gen;
  TrainOptions train;
  EvalOptions eval;
  AblateOptions ablate;
  AnalyzeOptions analyze;
  ReportOptions report;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> forcing;
  std::optional<int> jobs;
  std::string eval_checkpoint, eval_variant;

  auto common = [&](CLI::App* sc, fs::path& config, fs::path& out, bool with_forcing) {
    sc->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sc->add_option("--seed", seed, "override the config seed");
    sc->add_option("--out", out, "output directory")->required();
    sc->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    if (with_forcing)
      sc->add_option("--forcing", forcing, "teacher or student")->check(CLI::IsMember({"teacher", "student"}));
  };

  auto* c_gen = app.add_subcommand("gen", "generate worlds and episodes");
  common(c_gen, gen.config, gen.out, false);

  auto* c_train = app.add_subcommand("train", "train one model variant");
  common(c_train, train.config, train.out, true);
  c_train->add_option("--data", train.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  c_train->add_option("--variant", train.variant, "full, a, av or al")
      ->check(CLI::IsMember({"full", "a", "av", "al"}));

  auto* c_eval = app.add_subcommand("eval", "evaluate one checkpoint or scripted baseline");
  common(c_eval, eval.config, eval.out, false);
  c_eval->add_option("--data", eval.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  auto* ck = c_eval->add_option("--checkpoint", eval_checkpoint, "model.json from train")->check(CLI::ExistingFile);
  c_eval->add_option("--variant", eval_variant, "random_forward, random_100 or majority")
      ->check(CLI::IsMember({"random_forward", "random_100", "majority"}))
      ->excludes(ck);

  auto* c_ablate = app.add_subcommand("ablate", "evaluate checkpoints and baselines into one table");
  common(c_ablate, ablate.config, ablate.out, false);
  c_ablate->add_option("--data", ablate.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  c_ablate->add_option("--checkpoint", ablate.checkpoints, "model.json per variant")->check(CLI::ExistingFile);

  auto* c_analyze = app.add_subcommand("analyze", "action and answer bias report");
  c_analyze->add_option("--data", analyze.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  c_analyze->add_option("--split", analyze.split, "train, val_seen, val_unseen or all")
      ->check(CLI::IsMember({"train", "val_seen", "val_unseen", "all"}));
  c_analyze->add_option("--out", analyze.out, "output directory")->required();

  auto* c_report = app.add_subcommand("report", "aggregate results files into tables");
  c_report->add_option("--results", report.results, "results.json files or directories")
      ->required()
      ->check(CLI::ExistingPath);
  c_report->add_option("--variant", report.baseline, "variant shown as the baseline row");
  c_report->add_option("--out", report.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  ConfigOverrides overrides{seed, forcing, jobs};
  try {
    if (*c_gen) {
      gen.overrides = overrides;
      cmd_gen(gen);
    } else if (*c_train) {
      train.overrides = overrides;
      cmd_train(train);
    } else if (*c_eval) {
      eval.overrides = overrides;
      if (!eval_checkpoint.empty()) eval.checkpoint = eval_checkpoint;
      if (!eval_variant.empty()) eval.baseline = eval_variant;
      cmd_eval(eval);
    } else if (*c_ablate) {
      ablate.overrides = overrides;
      cmd_ablate(ablate);
    } else if (*c_analyze) {
      cmd_analyze(analyze);
    } else if (*c_report) {
      cmd_report(report);
    }
  } catch (const Error& e) {
    std::cerr << "navqa: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "navqa: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace navqa::cli
