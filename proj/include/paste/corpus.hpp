#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "paste/triplet.hpp"

namespace paste {

/// A whitespace-tokenized review sentence with its gold triplets. POS and DEP
/// tags are empty until the sentence has been annotated.
struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> pos_tags;
  std::vector<std::string> dep_labels;
  std::vector<OpinionTriplet> gold;
  SentenceFlags flags;

  int size() const { return static_cast<int>(tokens.size()); }
  bool annotated() const {
    return !tokens.empty() && pos_tags.size() == tokens.size() && dep_labels.size() == tokens.size();
  }

  friend bool operator==(const AnnotatedSentence&, const AnnotatedSentence&) = default;
};

enum class DatasetFormat {
  /// `sentence####[([a...], [o...], 'POS'), ...]`
  Published,
  /// One JSON object per line: {"tokens", "pos", "dep", "triplets"}.
  Canonical,
};

/// Reads a whole dataset. Errors carry the 1-based line number.
std::vector<AnnotatedSentence> import_dataset(std::istream& in, DatasetFormat format);
std::vector<AnnotatedSentence> import_dataset(const std::filesystem::path& file, DatasetFormat format);

/// Parses one published-format line (no trailing newline).
AnnotatedSentence parse_published_line(const std::string& line);

nlohmann::json triplet_to_json(const OpinionTriplet& t);
OpinionTriplet triplet_from_json(const nlohmann::json& j);
nlohmann::json to_canonical_json(const AnnotatedSentence& s);
AnnotatedSentence from_canonical_json(const nlohmann::json& j);
void export_canonical(std::ostream& out, const std::vector<AnnotatedSentence>& sentences);

// ---------------------------------------------------------------------------
// Annotation

struct TokenTags {
  std::vector<std::string> pos;
  std::vector<std::string> dep;
};

/// Pre-tokenized tagger. Implementations return one POS tag and one
/// incoming-arc dependency label per token and must not retokenize.
class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual TokenTags tag(const std::vector<std::string>& tokens) = 0;
  virtual std::vector<TokenTags> tag_batch(const std::vector<std::vector<std::string>>& batch);
  virtual std::string version() const = 0;
};

/// Serves frozen annotations loaded from canonical JSONL, keyed by token
/// sequence.
class FixtureAnnotator final : public Annotator {
 public:
  explicit FixtureAnnotator(const std::vector<AnnotatedSentence>& annotated, std::string version = "fixture");
  static FixtureAnnotator from_file(const std::filesystem::path& jsonl);

  TokenTags tag(const std::vector<std::string>& tokens) override;
  std::string version() const override { return version_; }

 private:
  std::map<std::vector<std::string>, TokenTags> table_;
  std::string version_;
};

/// Runs an external command once per batch. The command reads JSONL
/// {"tokens": [...]} on stdin and writes JSONL {"pos": [...], "dep": [...]}
/// on stdout, one line per input line.
class ProcessAnnotator final : public Annotator {
 public:
  explicit ProcessAnnotator(std::string command) : command_(std::move(command)) {}

  TokenTags tag(const std::vector<std::string>& tokens) override;
  std::vector<TokenTags> tag_batch(const std::vector<std::vector<std::string>>& batch) override;
  std::string version() const override { return "process:" + command_; }

 private:
  std::string command_;
};

/// Fills pos_tags/dep_labels. Throws if the annotator returns the wrong
/// number of tags.
AnnotatedSentence annotate(const AnnotatedSentence& sentence, Annotator& annotator);
void annotate_all(std::vector<AnnotatedSentence>& sentences, Annotator& annotator);

// ---------------------------------------------------------------------------
// Vocabulary

/// Dense string-to-id map. The first entries are reserved.
class IdMap {
 public:
  IdMap() = default;
  explicit IdMap(std::vector<std::string> reserved);

  int add(const std::string& key);
  /// Falls back to id 0 for unknown keys.
  int lookup(const std::string& key) const;
  bool contains(const std::string& key) const { return ids_.count(key) != 0; }
  int size() const { return static_cast<int>(keys_.size()); }
  const std::vector<std::string>& keys() const { return keys_; }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.keys_ == b.keys_; }

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> keys_;
};

struct Vocabulary {
  static constexpr int kUnk = 0;
  static constexpr int kPad = 1;

  IdMap words;
  /// Tag maps reserve id 0 for tags unseen during training.
  IdMap pos;
  IdMap dep;

  static Vocabulary from_keys(std::vector<std::string> words, std::vector<std::string> pos,
                              std::vector<std::string> dep);
  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

/// Builds word/POS/DEP maps from the training split only.
Vocabulary build_vocab(const std::vector<AnnotatedSentence>& train);

/// Pre-trained word vectors in the GloVe text layout (`word v1 ... vd`).
struct EmbeddingTable {
  int dim = 0;
  std::map<std::string, std::vector<float>> vectors;
  bool lowercase_keyed = true;

  static EmbeddingTable load(const std::filesystem::path& file);
  const std::vector<float>* find(const std::string& word) const;
};

// ---------------------------------------------------------------------------
// Statistics

struct SplitStatistics {
  int pos = 0, neg = 0, neu = 0;
  int single = 0, multi = 0, multipol = 0, overlap = 0;
  int sentences = 0;

  SplitStatistics& operator+=(const SplitStatistics& o);
  friend bool operator==(const SplitStatistics&, const SplitStatistics&) = default;
};

struct StatisticsReport {
  /// Keyed by split name ("train", "dev", "test").
  std::map<std::string, SplitStatistics> splits;

  SplitStatistics total() const;
  nlohmann::json to_json() const;
};

SplitStatistics compute_split_statistics(const std::vector<AnnotatedSentence>& sentences);
StatisticsReport compute_statistics(const std::map<std::string, std::vector<AnnotatedSentence>>& dataset);

// ---------------------------------------------------------------------------
// On-disk layout

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names{"train", "dev", "test"};
  return names;
}

/// Short dataset names: 14lap, 14rest, 15rest, 16rest, and rest-all (the
/// union of the three restaurant sets).
std::vector<std::string> dataset_components(const std::string& dataset);

/// Resolves `<data_dir>/<dataset>/<split>` to a file: canonical `<split>.jsonl`
/// first, then published `<split>_triplets.txt`. Restaurant directories may be
/// named `14res` or `14rest`.
std::optional<std::pair<std::filesystem::path, DatasetFormat>> find_split_file(
    const std::filesystem::path& data_dir, const std::string& component, const std::string& split);

/// Loads one split of a (possibly combined) dataset. Throws if any component
/// file is missing.
std::vector<AnnotatedSentence> load_split(const std::filesystem::path& data_dir, const std::string& dataset,
                                          const std::string& split);

}  // namespace paste
