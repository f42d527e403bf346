#include "paste/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "paste/checkpoint.hpp"
#include "paste/inference.hpp"
#include "paste/training.hpp"

namespace paste {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string>& single_datasets() {
  static const std::vector<std::string> names{"14lap", "14rest", "15rest", "16rest"};
  return names;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

bool dataset_present(const fs::path& data_dir, const std::string& component) {
  for (const auto& split : split_names()) {
    if (!find_split_file(data_dir, component, split)) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// stats

json cmd_stats(const RunSettings& settings, std::ostream& out, bool only_selected) {
  if (settings.data_dir.empty()) throw Error("no data directory given (--data-dir or PASTE_DATA_DIR)");
  if (!fs::is_directory(settings.data_dir)) throw Error("data directory " + settings.data_dir.string() + " not found");

  std::vector<std::string> wanted = only_selected ? dataset_components(settings.dataset) : single_datasets();
  json report;
  report["datasets"] = json::object();
  std::map<std::string, std::map<std::string, std::vector<AnnotatedSentence>>> loaded;
  for (const auto& name : wanted) {
    if (!dataset_present(settings.data_dir, name)) {
      if (only_selected) throw Error("dataset " + name + " is incomplete under " + settings.data_dir.string());
      continue;
    }
    for (const auto& split : split_names()) loaded[name][split] = load_split(settings.data_dir, name, split);
    report["datasets"][name] = compute_statistics(loaded[name]).to_json();
  }
  if (loaded.empty()) throw Error("no ASTE datasets found under " + settings.data_dir.string());

  const bool all_rest = loaded.count("14rest") && loaded.count("15rest") && loaded.count("16rest");
  if (all_rest) {
    std::map<std::string, std::vector<AnnotatedSentence>> combined;
    for (const auto& name : {"14rest", "15rest", "16rest"}) {
      for (const auto& split : split_names()) {
        auto& dst = combined[split];
        dst.insert(dst.end(), loaded[name][split].begin(), loaded[name][split].end());
      }
    }
    report["datasets"]["rest-all"] = compute_statistics(combined).to_json();
  }

  long overlap = 0, sentences = 0;
  for (const auto& key : {"14lap", "rest-all"}) {
    if (!report["datasets"].contains(key)) continue;
    overlap += report["datasets"][key]["total"]["Overlap"].get<long>();
    sentences += report["datasets"][key]["total"]["Sentences"].get<long>();
  }
  if (sentences == 0) {
    for (const auto& [name, r] : report["datasets"].items()) {
      overlap += r["total"]["Overlap"].get<long>();
      sentences += r["total"]["Sentences"].get<long>();
    }
  }
  report["overlap_fraction"] = sentences > 0 ? static_cast<double>(overlap) / sentences : 0.0;

  const std::string text = render_statistics(report);
  out << text;
  write_text(settings.out_dir / "stats.txt", text);
  write_text(settings.out_dir / "stats.json", report.dump(2) + "\n");
  return report;
}

std::string render_statistics(const json& stats) {
  std::ostringstream o;
  const json& ds = stats.at("datasets");
  std::vector<std::string> names;
  for (const auto& n : {"14lap", "14rest", "15rest", "16rest", "rest-all"}) {
    if (ds.contains(n)) names.push_back(n);
  }

  o << "# Triplets with various sentiment polarities\n";
  o << std::left << std::setw(8) << "";
  for (const auto& n : names) o << std::right << std::setw(21) << n;
  o << '\n' << std::left << std::setw(8) << "";
  for (std::size_t i = 0; i < names.size(); ++i) o << std::right << std::setw(7) << "#Pos" << std::setw(7) << "#Neg" << std::setw(7) << "#Neu";
  o << '\n';
  for (const auto& split : split_names()) {
    o << std::left << std::setw(8) << split;
    for (const auto& n : names) {
      const json& s = ds[n][split];
      o << std::right << std::setw(7) << s["POS"].get<int>() << std::setw(7) << s["NEG"].get<int>() << std::setw(7)
        << s["NEU"].get<int>();
    }
    o << '\n';
  }

  o << "\n# Sentences by triplet structure\n";
  std::vector<std::pair<std::string, std::string>> groups;
  if (ds.contains("14lap")) groups.emplace_back("Laptop", "14lap");
  if (ds.contains("rest-all")) groups.emplace_back("Restaurant", "rest-all");
  if (groups.empty()) {
    for (const auto& n : names) groups.emplace_back(n, n);
  }
  const std::vector<std::pair<std::string, std::string>> cols{
      {"Single", "Single"}, {"Multi", "Multi"}, {"MultiPol", "MultiPol"}, {"Overlap", "Overlap"}, {"#Sent", "Sentences"}};
  o << std::left << std::setw(8) << "";
  for (const auto& [label, _] : groups) o << std::right << std::setw(45) << label;
  o << '\n' << std::left << std::setw(8) << "";
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (const auto& [head, _] : cols) o << std::right << std::setw(9) << head;
  }
  o << '\n';
  std::vector<std::string> rows = split_names();
  rows.push_back("total");
  for (const auto& row : rows) {
    o << std::left << std::setw(8) << row;
    for (const auto& [_, key] : groups) {
      for (const auto& [__, field] : cols) o << std::right << std::setw(9) << ds[key][row][field].get<int>();
    }
    o << '\n';
  }
  o << "\nOverlap sentences: " << fixed(100.0 * stats.at("overlap_fraction").get<double>(), 2) << "%\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// data

std::vector<AnnotatedSentence> load_annotated_split(const RunSettings& settings, const std::string& split,
                                                    bool needs_tags) {
  if (settings.data_dir.empty()) throw Error("no data directory given (--data-dir or PASTE_DATA_DIR)");
  auto sentences = load_split(settings.data_dir, settings.dataset, split);
  if (!needs_tags) return sentences;
  const bool missing = std::any_of(sentences.begin(), sentences.end(), [](const auto& s) { return !s.annotated(); });
  if (missing) {
    if (!settings.annotator) {
      throw Error(settings.dataset + "/" + split +
                  " has no POS/DEP annotation; provide canonical JSONL with tags or set --annotator");
    }
    ProcessAnnotator annotator(*settings.annotator);
    annotate_all(sentences, annotator);
  }
  return sentences;
}

// ---------------------------------------------------------------------------
// train

json RunRecord::to_json() const {
  return {{"seed", seed},
          {"best_epoch", best_epoch},
          {"dev", dev.to_json()},
          {"test", test.to_json()},
          {"checkpoint", checkpoint.string()}};
}

json RunManifest::medians() const {
  json m = json::object();
  if (runs.empty()) return m;
  auto med = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(field(r));
    return median(v);
  };
  m["dev_p"] = med([](const RunRecord& r) { return r.dev.precision(); });
  m["dev_r"] = med([](const RunRecord& r) { return r.dev.recall(); });
  m["dev_f1"] = med([](const RunRecord& r) { return r.dev.f1(); });
  m["test_p"] = med([](const RunRecord& r) { return r.test.precision(); });
  m["test_r"] = med([](const RunRecord& r) { return r.test.recall(); });
  m["test_f1"] = med([](const RunRecord& r) { return r.test.f1(); });
  return m;
}

json RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["config"] = settings.to_json();
  j["seeds"] = settings.seeds;
  j["runs"] = json::array();
  for (const auto& r : runs) j["runs"].push_back(r.to_json());
  j["median"] = medians();
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["artifacts"] = json::array();
  for (const auto& a : artifacts) j["artifacts"].push_back(a.string());
  return j;
}

namespace {

RunManifest train_runs(const std::string& command, const RunSettings& settings, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const bool needs_tags = settings.model.d_pos > 0 || settings.model.d_dep > 0;
  const auto train_set = load_annotated_split(settings, "train", needs_tags);
  const auto dev_set = load_annotated_split(settings, "dev", needs_tags);
  const auto test_set = load_annotated_split(settings, "test", needs_tags);

  std::optional<EmbeddingTable> embeddings;
  if (settings.embeddings) embeddings = EmbeddingTable::load(*settings.embeddings);

  RunManifest manifest{command, settings, {}, 0.0, {}};
  if (!settings.max_steps_explicit) manifest.settings.model.max_steps = default_max_steps(train_set);
  fs::create_directories(settings.out_dir);
  write_text(settings.out_dir / "config.resolved", manifest.settings.to_key_values());
  manifest.artifacts.push_back(settings.out_dir / "config.resolved");

  std::vector<std::vector<OpinionTriplet>> test_gold;
  for (const auto& s : test_set) test_gold.push_back(s.gold);

  for (std::size_t k = 0; k < settings.seeds.size(); ++k) {
    TrainConfig tc = settings.train;
    tc.seed = settings.seeds[k];
    const fs::path run_dir = settings.out_dir / ("run-" + std::to_string(k + 1) + "-seed-" + std::to_string(tc.seed));
    fs::create_directories(run_dir);
    std::ofstream log(run_dir / "train_log.jsonl");

    TrainHooks hooks;
    hooks.log = &log;
    hooks.checkpoint = run_dir / "model.ckpt";
    out << "[" << command << "] run " << (k + 1) << "/" << settings.seeds.size() << " seed " << tc.seed << std::endl;
    TrainResult result = train(train_set, dev_set, manifest.settings.model, tc, embeddings ? &*embeddings : nullptr, hooks);

    RunRecord rec;
    rec.seed = tc.seed;
    rec.best_epoch = result.best_epoch;
    rec.dev = result.best_dev;
    rec.test = score_exact_match(predict_all(result.model, result.vocab, test_set), test_gold);
    rec.checkpoint = *hooks.checkpoint;
    out << "  best epoch " << rec.best_epoch << "  dev F1 " << fixed(rec.dev.f1()) << "  test P/R/F1 "
        << fixed(rec.test.precision()) << "/" << fixed(rec.test.recall()) << "/" << fixed(rec.test.f1()) << '\n';
    manifest.runs.push_back(rec);
    manifest.artifacts.push_back(rec.checkpoint);
    manifest.artifacts.push_back(run_dir / "train_log.jsonl");
  }

  manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  manifest.artifacts.push_back(settings.out_dir / "manifest.json");
  write_text(settings.out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  const json med = manifest.medians();
  out << "median over " << manifest.runs.size() << " run(s): test P/R/F1 " << fixed(med["test_p"]) << "/"
      << fixed(med["test_r"]) << "/" << fixed(med["test_f1"]) << "  dev F1 " << fixed(med["dev_f1"]) << '\n'
      << "checkpoints selected by best dev F1; manifest: " << (settings.out_dir / "manifest.json").string() << '\n';
  return manifest;
}

}  // namespace

RunManifest cmd_train(const RunSettings& settings, std::ostream& out) { return train_runs("train", settings, out); }

// ---------------------------------------------------------------------------
// eval / predict

namespace {

Checkpoint load_checked(const RunSettings& settings) {
  if (!settings.checkpoint) throw Error("no checkpoint given (--checkpoint)");
  Checkpoint ck = load_checkpoint(*settings.checkpoint);
  json expected = settings.explicit_model_keys;
  expected.erase("max_steps");
  check_config_matches(ck.config, expected);
  if (settings.max_steps_explicit) ck.config.max_steps = settings.model.max_steps;
  return ck;
}

bool config_needs_tags(const ModelConfig& c) { return c.d_pos > 0 || c.d_dep > 0; }

}  // namespace

EvalReport cmd_eval(const RunSettings& settings, std::ostream& out) {
  Checkpoint ck = load_checked(settings);
  auto model = ck.model();
  const auto sentences = load_annotated_split(settings, settings.split, config_needs_tags(ck.config));
  TripletSets gold;
  std::vector<SentenceFlags> flags;
  for (const auto& s : sentences) {
    gold.push_back(s.gold);
    flags.push_back(s.flags);
  }
  const EvalReport report = evaluate(predict_all(model, ck.vocab, sentences), gold, flags);
  out << settings.dataset << " / " << settings.split << " (" << sentences.size() << " sentences)\n" << report.to_text();
  write_text(settings.out_dir / ("eval_" + settings.dataset + "_" + settings.split + ".json"),
             report.to_json().dump(2) + "\n");
  return report;
}

void cmd_predict(const RunSettings& settings, const std::optional<fs::path>& input, std::ostream& jsonl_out) {
  Checkpoint ck = load_checked(settings);
  auto model = ck.model();
  std::vector<AnnotatedSentence> sentences;
  if (input) {
    sentences = import_dataset(*input, input->extension() == ".jsonl" ? DatasetFormat::Canonical : DatasetFormat::Published);
    if (config_needs_tags(ck.config) &&
        std::any_of(sentences.begin(), sentences.end(), [](const auto& s) { return !s.annotated(); })) {
      if (!settings.annotator) throw Error(input->string() + " has no POS/DEP annotation; set --annotator");
      ProcessAnnotator annotator(*settings.annotator);
      annotate_all(sentences, annotator);
    }
  } else {
    sentences = load_annotated_split(settings, settings.split, config_needs_tags(ck.config));
  }
  const TripletSets pred = predict_all(model, ck.vocab, sentences);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    json j = to_canonical_json(sentences[i]);
    j["predicted"] = json::array();
    for (const auto& t : pred[i]) j["predicted"].push_back(triplet_to_json(t));
    jsonl_out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// ablate

Ablation parse_ablation(const std::string& name) {
  if (name == "random_order" || name == "random-order") return Ablation::RandomOrder;
  if (name == "no_posdep" || name == "no-posdep") return Ablation::NoPosDep;
  throw Error("unknown ablation '" + name + "' (expected random_order or no_posdep)");
}

RunSettings ablated_settings(const RunSettings& base, Ablation ablation) {
  RunSettings s = base;
  if (ablation == Ablation::RandomOrder) {
    s.train.random_target_order = true;
  } else {
    s.model.d_pos = 0;
    s.model.d_dep = 0;
  }
  return s;
}

std::vector<double> AblationReport::deltas() const {
  std::vector<double> d;
  for (std::size_t k = 0; k < baseline.runs.size() && k < ablated.runs.size(); ++k) {
    d.push_back(ablated.runs[k].test.f1() - baseline.runs[k].test.f1());
  }
  return d;
}

namespace {

std::string ablation_name(Ablation a) { return a == Ablation::RandomOrder ? "random_order" : "no_posdep"; }

double percent_drop(double base, double ablated) { return base > 0.0 ? 100.0 * (base - ablated) / base : 0.0; }

}  // namespace

json AblationReport::to_json() const {
  json j;
  j["ablation"] = ablation_name(ablation);
  j["baseline"] = baseline.to_json();
  j["ablated"] = ablated.to_json();
  j["per_run"] = json::array();
  const auto d = deltas();
  for (std::size_t k = 0; k < d.size(); ++k) {
    j["per_run"].push_back({{"seed", baseline.runs[k].seed},
                            {"baseline_f1", baseline.runs[k].test.f1()},
                            {"ablated_f1", ablated.runs[k].test.f1()},
                            {"delta_f1", d[k]}});
  }
  j["median_delta_f1"] = d.empty() ? 0.0 : median(d);
  const double base = baseline.medians().value("test_f1", 0.0);
  const double abl = ablated.medians().value("test_f1", 0.0);
  j["median_f1_drop_percent"] = percent_drop(base, abl);
  return j;
}

std::string AblationReport::to_text() const {
  std::ostringstream o;
  const json b = baseline.medians(), a = ablated.medians();
  const std::string variant =
      baseline.settings.model.direction == Direction::AspectFirst ? "PASTE-AF" : "PASTE-OF";
  const std::string row = ablation == Ablation::RandomOrder ? "  w/ Random" : "  - POS & DEP";
  o << std::left << std::setw(16) << "Model" << std::right << std::setw(8) << "P." << std::setw(8) << "R."
    << std::setw(8) << "F1" << std::setw(10) << "%F1 drop" << '\n';
  o << std::left << std::setw(16) << variant << std::right << std::setw(8) << fixed(b["test_p"]) << std::setw(8)
    << fixed(b["test_r"]) << std::setw(8) << fixed(b["test_f1"]) << std::setw(10) << "-" << '\n';
  o << std::left << std::setw(16) << row << std::right << std::setw(8) << fixed(a["test_p"]) << std::setw(8)
    << fixed(a["test_r"]) << std::setw(8) << fixed(a["test_f1"]) << std::setw(9)
    << fixed(percent_drop(b["test_f1"], a["test_f1"]), 1) << "%" << '\n';
  const auto d = deltas();
  o << "per-run F1 delta:";
  for (double x : d) o << ' ' << fixed(x, 4);
  o << "  median " << fixed(d.empty() ? 0.0 : median(d), 4) << '\n';
  return o.str();
}

AblationReport cmd_ablate(const RunSettings& settings, Ablation ablation, std::ostream& out) {
  AblationReport report;
  report.ablation = ablation;
  RunSettings base = settings;
  base.out_dir = settings.out_dir / "baseline";
  base.train.random_target_order = false;
  RunSettings abl = ablated_settings(base, ablation);
  abl.out_dir = settings.out_dir / ablation_name(ablation);
  report.baseline = train_runs("ablate:baseline", base, out);
  report.ablated = train_runs("ablate:" + ablation_name(ablation), abl, out);
  const std::string text = report.to_text();
  out << text;
  write_text(settings.out_dir / "ablation.txt", text);
  write_text(settings.out_dir / "ablation.json", report.to_json().dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// CLI

namespace {

struct FlagSet {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::string config_file;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(key, app->add_option(flag, values[key], help));
  }

  KeyValues given() const {
    KeyValues kv;
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) kv[key] = values.at(key);
    }
    return kv;
  }
};

void add_common_flags(CLI::App* app, FlagSet& f) {
  app->add_option("--config", f.config_file, "key = value config file; flags override it");
  f.add(app, "--data-dir", "data_dir", "dataset root (falls back to $PASTE_DATA_DIR)");
  f.add(app, "--dataset", "dataset", "14lap, 14rest, 15rest, 16rest or rest-all");
  f.add(app, "--out-dir", "out_dir", "output directory");
  f.add(app, "--annotator", "annotator", "command producing POS/DEP tags (JSONL in/out)");
}

void add_model_flags(CLI::App* app, FlagSet& f) {
  f.add(app, "--direction", "direction", "af (aspect first) or of (opinion first)");
  f.add(app, "--d-w", "d_w", "word embedding size");
  f.add(app, "--d-pos", "d_pos", "POS embedding size");
  f.add(app, "--d-dep", "d_dep", "DEP embedding size");
  f.add(app, "--d-h", "d_h", "decoder hidden size");
  f.add(app, "--d-p", "d_p", "pointer Bi-LSTM output size");
  f.add(app, "--dropout", "dropout", "embedding dropout rate");
  f.add(app, "--max-steps", "max_steps", "decoding step cap");
}

void add_train_flags(CLI::App* app, FlagSet& f) {
  f.add(app, "--epochs", "epochs", "training epochs");
  f.add(app, "--batch-size", "batch_size", "mini-batch size");
  f.add(app, "--lr", "lr", "Adam learning rate");
  f.add(app, "--weight-decay", "weight_decay", "L2 weight decay");
  f.add(app, "--runs", "runs", "number of seeded runs");
  f.add(app, "--seed", "seed", "first seed (runs use seed, seed+1, ...)");
  f.add(app, "--seeds", "seeds", "comma-separated seed list");
  f.add(app, "--embeddings", "embeddings", "pre-trained word vectors (GloVe text format)");
}

RunSettings settings_from(const FlagSet& f) {
  std::vector<KeyValues> layers;
  if (const char* env = std::getenv("PASTE_DATA_DIR"); env != nullptr && *env != '\0') {
    layers.push_back({{"data_dir", env}});
  }
  if (!f.config_file.empty()) layers.push_back(read_key_values(f.config_file));
  layers.push_back(f.given());
  return resolve_settings(layers);
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pointer-network opinion triplet extraction"};
  app.require_subcommand(1);

  FlagSet stats_f, train_f, eval_f, predict_f, ablate_f;
  auto* stats = app.add_subcommand("stats", "dataset statistics");
  add_common_flags(stats, stats_f);
  bool stats_only_selected = false;
  stats->add_flag("--only-selected", stats_only_selected, "restrict to --dataset");

  auto* train_cmd = app.add_subcommand("train", "train seeded runs and report medians");
  add_common_flags(train_cmd, train_f);
  add_model_flags(train_cmd, train_f);
  add_train_flags(train_cmd, train_f);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common_flags(eval, eval_f);
  add_model_flags(eval, eval_f);
  eval_f.add(eval, "--checkpoint", "checkpoint", "checkpoint file");
  eval_f.add(eval, "--split", "split", "train, dev or test");

  auto* predict = app.add_subcommand("predict", "write predicted triplets as JSONL");
  add_common_flags(predict, predict_f);
  add_model_flags(predict, predict_f);
  predict_f.add(predict, "--checkpoint", "checkpoint", "checkpoint file");
  predict_f.add(predict, "--split", "split", "split to predict when no --input is given");
  std::string predict_input, predict_output;
  predict->add_option("--input", predict_input, "input file (.jsonl canonical, otherwise published format)");
  predict->add_option("--output", predict_output, "output JSONL (default stdout)");

  auto* ablate = app.add_subcommand("ablate", "paired baseline/ablation runs");
  add_common_flags(ablate, ablate_f);
  add_model_flags(ablate, ablate_f);
  add_train_flags(ablate, ablate_f);
  std::string ablation_kind;
  ablate->add_option("--ablation", ablation_kind, "random_order or no_posdep")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  RunSettings settings;
  try {
    if (*stats) settings = settings_from(stats_f);
    if (*train_cmd) settings = settings_from(train_f);
    if (*eval) settings = settings_from(eval_f);
    if (*predict) settings = settings_from(predict_f);
    if (*ablate) settings = settings_from(ablate_f);
  } catch (const Error& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*stats) cmd_stats(settings, out, stats_only_selected);
    if (*train_cmd) cmd_train(settings, out);
    if (*eval) cmd_eval(settings, out);
    if (*predict) {
      std::optional<fs::path> input;
      if (!predict_input.empty()) input = predict_input;
      if (predict_output.empty()) {
        cmd_predict(settings, input, out);
      } else {
        std::ofstream file(predict_output);
        if (!file) throw Error("cannot write " + predict_output);
        cmd_predict(settings, input, file);
      }
    }
    if (*ablate) cmd_ablate(settings, parse_ablation(ablation_kind), out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace paste
