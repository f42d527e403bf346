#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "paste/corpus.hpp"
#include "paste/evaluation.hpp"
#include "paste/run_config.hpp"

namespace paste {

/// Statistics for every dataset found under settings.data_dir (or only
/// settings.dataset when `only_selected`). Writes stats.txt / stats.json into
/// out_dir and prints the text report.
nlohmann::json cmd_stats(const RunSettings& settings, std::ostream& out, bool only_selected = false);

/// Text rendering of a cmd_stats JSON report, one block per table layout.
std::string render_statistics(const nlohmann::json& stats);

struct RunRecord {
  std::uint64_t seed = 0;
  int best_epoch = 0;
  Prf dev;
  Prf test;
  std::filesystem::path checkpoint;

  nlohmann::json to_json() const;
};

struct RunManifest {
  std::string command;
  RunSettings settings;
  std::vector<RunRecord> runs;
  double wall_clock_seconds = 0.0;
  std::vector<std::filesystem::path> artifacts;

  nlohmann::json medians() const;
  nlohmann::json to_json() const;
};

/// Loads a split, annotating it with settings.annotator when the model needs
/// POS/DEP features and the files carry none.
std::vector<AnnotatedSentence> load_annotated_split(const RunSettings& settings, const std::string& split,
                                                    bool needs_tags);

/// Trains settings.train.runs models (one per seed) and evaluates each best
/// checkpoint on the test split. Writes run directories and manifest.json.
RunManifest cmd_train(const RunSettings& settings, std::ostream& out);

/// Evaluates settings.checkpoint on settings.split. Throws Error when
/// explicitly requested model settings disagree with the checkpoint.
EvalReport cmd_eval(const RunSettings& settings, std::ostream& out);

/// Writes canonical JSONL with a "predicted" field for every input sentence.
void cmd_predict(const RunSettings& settings, const std::optional<std::filesystem::path>& input,
                 std::ostream& jsonl_out);

enum class Ablation { RandomOrder, NoPosDep };
Ablation parse_ablation(const std::string& name);

struct AblationReport {
  Ablation ablation = Ablation::RandomOrder;
  RunManifest baseline;
  RunManifest ablated;

  /// ablated test F1 - baseline test F1, per run.
  std::vector<double> deltas() const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Applies the ablation to a copy of the settings.
RunSettings ablated_settings(const RunSettings& base, Ablation ablation);

AblationReport cmd_ablate(const RunSettings& settings, Ablation ablation, std::ostream& out);

/// Entry point of the `paste` executable.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace paste
