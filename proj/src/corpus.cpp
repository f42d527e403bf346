#include "paste/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace paste {

using nlohmann::json;

namespace {

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

/// Cursor over the python-literal triplet list of the published format.
class LiteralCursor {
 public:
  explicit LiteralCursor(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  void expect(char c) {
    if (!peek(c)) {
      throw Error(std::string("expected '") + c + "' at column " + std::to_string(pos_ + 1));
    }
    ++pos_;
  }
  bool accept(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }
  bool at_end() {
    skip_ws();
    return pos_ == text_.size();
  }

  std::vector<int> int_list() {
    std::vector<int> out;
    expect('[');
    if (accept(']')) return out;
    do {
      skip_ws();
      const std::size_t begin = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (begin == pos_) throw Error("expected token index at column " + std::to_string(pos_ + 1));
      out.push_back(std::stoi(std::string(text_.substr(begin, pos_ - begin))));
    } while (accept(','));
    expect(']');
    return out;
  }

  std::string quoted() {
    skip_ws();
    if (pos_ >= text_.size() || (text_[pos_] != '\'' && text_[pos_] != '"')) {
      throw Error("expected quoted sentiment at column " + std::to_string(pos_ + 1));
    }
    const char q = text_[pos_++];
    const std::size_t begin = pos_;
    while (pos_ < text_.size() && text_[pos_] != q) ++pos_;
    if (pos_ == text_.size()) throw Error("unterminated string");
    return std::string(text_.substr(begin, pos_++ - begin));
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

Span span_from_indices(const std::vector<int>& idx, const char* what) {
  if (idx.empty()) throw Error(std::string("empty ") + what + " index list");
  const auto [lo, hi] = std::minmax_element(idx.begin(), idx.end());
  return {*lo, *hi};
}

void finalize(AnnotatedSentence& s) {
  if (s.tokens.empty()) throw Error("sentence has no tokens");
  if (s.gold.empty()) throw Error("sentence has no triplets");
  if (!s.pos_tags.empty() && s.pos_tags.size() != s.tokens.size()) {
    throw Error("pos list length " + std::to_string(s.pos_tags.size()) + " != token count " +
                std::to_string(s.tokens.size()));
  }
  if (!s.dep_labels.empty() && s.dep_labels.size() != s.tokens.size()) {
    throw Error("dep list length " + std::to_string(s.dep_labels.size()) + " != token count " +
                std::to_string(s.tokens.size()));
  }
  if (s.size() < 2) throw Error("sentence with triplets needs at least two tokens");
  for (const auto& t : s.gold) {
    if (auto v = validate_triplet(t, s.size()); !v) throw Error(v.message);
  }
  s.flags = classify_sentence(s.gold);
}

}  // namespace

AnnotatedSentence parse_published_line(const std::string& line) {
  const auto sep = line.find("####");
  if (sep == std::string::npos) throw Error("missing '####' separator");

  AnnotatedSentence s;
  s.tokens = split_whitespace(line.substr(0, sep));
  LiteralCursor cur(std::string_view(line).substr(sep + 4));
  cur.expect('[');
  if (!cur.accept(']')) {
    do {
      cur.expect('(');
      const auto aspect = cur.int_list();
      cur.expect(',');
      const auto opinion = cur.int_list();
      cur.expect(',');
      const auto label = cur.quoted();
      cur.expect(')');
      s.gold.push_back({span_from_indices(aspect, "aspect"), span_from_indices(opinion, "opinion"),
                        parse_sentiment(label)});
    } while (cur.accept(','));
    cur.expect(']');
  }
  if (!cur.at_end()) throw Error("trailing characters after triplet list");
  finalize(s);
  return s;
}

json triplet_to_json(const OpinionTriplet& t) {
  return json::array({t.aspect.start, t.aspect.end, t.opinion.start, t.opinion.end, std::string(to_string(t.sentiment))});
}

OpinionTriplet triplet_from_json(const json& j) {
  if (!j.is_array() || j.size() != 5) throw Error("triplet must be [as, ae, os, oe, label]");
  return {{j[0].get<int>(), j[1].get<int>()}, {j[2].get<int>(), j[3].get<int>()},
          parse_sentiment(j[4].get<std::string>())};
}

json to_canonical_json(const AnnotatedSentence& s) {
  json j;
  j["tokens"] = s.tokens;
  j["pos"] = s.pos_tags.empty() ? json(nullptr) : json(s.pos_tags);
  j["dep"] = s.dep_labels.empty() ? json(nullptr) : json(s.dep_labels);
  j["triplets"] = json::array();
  for (const auto& t : s.gold) j["triplets"].push_back(triplet_to_json(t));
  return j;
}

AnnotatedSentence from_canonical_json(const json& j) {
  if (!j.is_object()) throw Error("expected a JSON object");
  AnnotatedSentence s;
  s.tokens = j.at("tokens").get<std::vector<std::string>>();
  if (j.contains("pos") && !j["pos"].is_null()) s.pos_tags = j["pos"].get<std::vector<std::string>>();
  if (j.contains("dep") && !j["dep"].is_null()) s.dep_labels = j["dep"].get<std::vector<std::string>>();
  for (const auto& t : j.at("triplets")) s.gold.push_back(triplet_from_json(t));
  finalize(s);
  return s;
}

std::vector<AnnotatedSentence> import_dataset(std::istream& in, DatasetFormat format) {
  std::vector<AnnotatedSentence> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      if (format == DatasetFormat::Published) {
        out.push_back(parse_published_line(line));
      } else {
        out.push_back(from_canonical_json(json::parse(line)));
      }
    } catch (const std::exception& e) {
      throw Error("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AnnotatedSentence> import_dataset(const std::filesystem::path& file, DatasetFormat format) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file.string());
  try {
    return import_dataset(in, format);
  } catch (const Error& e) {
    throw Error(file.string() + ": " + e.what());
  }
}

void export_canonical(std::ostream& out, const std::vector<AnnotatedSentence>& sentences) {
  for (const auto& s : sentences) out << to_canonical_json(s).dump() << '\n';
}

// ---------------------------------------------------------------------------

std::vector<TokenTags> Annotator::tag_batch(const std::vector<std::vector<std::string>>& batch) {
  std::vector<TokenTags> out;
  out.reserve(batch.size());
  for (const auto& tokens : batch) out.push_back(tag(tokens));
  return out;
}

FixtureAnnotator::FixtureAnnotator(const std::vector<AnnotatedSentence>& annotated, std::string version)
    : version_(std::move(version)) {
  for (const auto& s : annotated) {
    if (!s.annotated()) throw Error("fixture sentence is not annotated");
    table_[s.tokens] = {s.pos_tags, s.dep_labels};
  }
}

FixtureAnnotator FixtureAnnotator::from_file(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw Error("cannot open annotation fixture " + jsonl.string());
  std::vector<AnnotatedSentence> rows;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    AnnotatedSentence s;
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    s.pos_tags = j.at("pos").get<std::vector<std::string>>();
    s.dep_labels = j.at("dep").get<std::vector<std::string>>();
    rows.push_back(std::move(s));
  }
  return FixtureAnnotator(rows, "fixture:" + jsonl.filename().string());
}

TokenTags FixtureAnnotator::tag(const std::vector<std::string>& tokens) {
  auto it = table_.find(tokens);
  if (it == table_.end()) throw Error("no frozen annotation for sentence starting '" + tokens.front() + "'");
  return it->second;
}

TokenTags ProcessAnnotator::tag(const std::vector<std::string>& tokens) {
  return tag_batch({tokens}).front();
}

std::vector<TokenTags> ProcessAnnotator::tag_batch(const std::vector<std::vector<std::string>>& batch) {
  static std::atomic<int> counter{0};
  const auto stem = std::filesystem::temp_directory_path() /
                    ("paste-annot-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  const auto in_path = stem.string() + ".in.jsonl";
  const auto out_path = stem.string() + ".out.jsonl";
  {
    std::ofstream in(in_path);
    for (const auto& tokens : batch) in << json{{"tokens", tokens}}.dump() << '\n';
  }
  const std::string cmd = command_ + " < '" + in_path + "' > '" + out_path + "'";
  const int rc = std::system(cmd.c_str());
  std::vector<TokenTags> out;
  std::ifstream result(out_path);
  std::string line;
  while (rc == 0 && std::getline(result, line)) {
    const auto j = json::parse(line);
    out.push_back({j.at("pos").get<std::vector<std::string>>(), j.at("dep").get<std::vector<std::string>>()});
  }
  std::filesystem::remove(in_path);
  std::filesystem::remove(out_path);
  if (rc != 0) throw Error("annotator command failed (exit " + std::to_string(rc) + "): " + command_);
  if (out.size() != batch.size()) {
    throw Error("annotator returned " + std::to_string(out.size()) + " lines for " + std::to_string(batch.size()) +
                " sentences");
  }
  return out;
}

AnnotatedSentence annotate(const AnnotatedSentence& sentence, Annotator& annotator) {
  AnnotatedSentence out = sentence;
  TokenTags tags = annotator.tag(sentence.tokens);
  if (tags.pos.size() != sentence.tokens.size() || tags.dep.size() != sentence.tokens.size()) {
    throw Error("annotator returned " + std::to_string(tags.pos.size()) + " POS / " +
                std::to_string(tags.dep.size()) + " DEP tags for " + std::to_string(sentence.tokens.size()) +
                " tokens");
  }
  out.pos_tags = std::move(tags.pos);
  out.dep_labels = std::move(tags.dep);
  return out;
}

void annotate_all(std::vector<AnnotatedSentence>& sentences, Annotator& annotator) {
  std::vector<std::vector<std::string>> batch;
  batch.reserve(sentences.size());
  for (const auto& s : sentences) batch.push_back(s.tokens);
  auto tags = annotator.tag_batch(batch);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto n = sentences[i].tokens.size();
    if (tags[i].pos.size() != n || tags[i].dep.size() != n) {
      throw Error("annotator returned mismatched tag count for sentence " + std::to_string(i + 1));
    }
    sentences[i].pos_tags = std::move(tags[i].pos);
    sentences[i].dep_labels = std::move(tags[i].dep);
  }
}

// ---------------------------------------------------------------------------

IdMap::IdMap(std::vector<std::string> reserved) {
  for (auto& k : reserved) add(k);
}

int IdMap::add(const std::string& key) {
  auto [it, inserted] = ids_.try_emplace(key, static_cast<int>(keys_.size()));
  if (inserted) keys_.push_back(key);
  return it->second;
}

int IdMap::lookup(const std::string& key) const {
  auto it = ids_.find(key);
  return it == ids_.end() ? 0 : it->second;
}

Vocabulary Vocabulary::from_keys(std::vector<std::string> words, std::vector<std::string> pos,
                                 std::vector<std::string> dep) {
  Vocabulary v;
  for (auto& w : words) v.words.add(w);
  for (auto& p : pos) v.pos.add(p);
  for (auto& d : dep) v.dep.add(d);
  if (v.words.size() < 2 || v.words.keys()[kUnk] != "<unk>" || v.words.keys()[kPad] != "<pad>") {
    throw Error("vocabulary must start with <unk>, <pad>");
  }
  return v;
}

json Vocabulary::to_json() const {
  return {{"words", words.keys()}, {"pos", pos.keys()}, {"dep", dep.keys()}};
}

Vocabulary Vocabulary::from_json(const json& j) {
  return from_keys(j.at("words").get<std::vector<std::string>>(), j.at("pos").get<std::vector<std::string>>(),
                   j.at("dep").get<std::vector<std::string>>());
}

Vocabulary build_vocab(const std::vector<AnnotatedSentence>& train) {
  if (train.empty()) throw Error("build_vocab: empty training set");
  Vocabulary v;
  v.words = IdMap({"<unk>", "<pad>"});
  v.pos = IdMap({"<unk>"});
  v.dep = IdMap({"<unk>"});
  for (const auto& s : train) {
    for (const auto& w : s.tokens) v.words.add(w);
    for (const auto& p : s.pos_tags) v.pos.add(p);
    for (const auto& d : s.dep_labels) v.dep.add(d);
  }
  return v;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open embeddings " + file.string());
  EmbeddingTable table;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    auto fields = split_whitespace(line);
    if (fields.size() < 2) continue;
    if (table.dim == 0) table.dim = static_cast<int>(fields.size()) - 1;
    if (static_cast<int>(fields.size()) <= table.dim) {
      throw Error(file.string() + ": line " + std::to_string(lineno) + " has too few values");
    }
    const std::size_t word_fields = fields.size() - table.dim;
    std::string word = fields[0];
    for (std::size_t i = 1; i < word_fields; ++i) word += " " + fields[i];
    std::vector<float> vec(table.dim);
    for (int i = 0; i < table.dim; ++i) vec[i] = std::stof(fields[word_fields + i]);
    if (std::any_of(word.begin(), word.end(), [](unsigned char c) { return std::isupper(c); })) {
      table.lowercase_keyed = false;
    }
    table.vectors.emplace(std::move(word), std::move(vec));
  }
  return table;
}

const std::vector<float>* EmbeddingTable::find(const std::string& word) const {
  std::string key = word;
  if (lowercase_keyed) {
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  }
  auto it = vectors.find(key);
  return it == vectors.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------

SplitStatistics& SplitStatistics::operator+=(const SplitStatistics& o) {
  pos += o.pos;
  neg += o.neg;
  neu += o.neu;
  single += o.single;
  multi += o.multi;
  multipol += o.multipol;
  overlap += o.overlap;
  sentences += o.sentences;
  return *this;
}

SplitStatistics compute_split_statistics(const std::vector<AnnotatedSentence>& sentences) {
  SplitStatistics st;
  for (const auto& s : sentences) {
    for (const auto& t : s.gold) {
      switch (t.sentiment) {
        case Sentiment::POS: ++st.pos; break;
        case Sentiment::NEG: ++st.neg; break;
        case Sentiment::NEU: ++st.neu; break;
        case Sentiment::NONE: break;
      }
    }
    const auto f = classify_sentence(s.gold);
    st.single += f.is_single;
    st.multi += f.is_multi;
    st.multipol += f.is_multipol;
    st.overlap += f.is_overlap;
    ++st.sentences;
  }
  return st;
}

StatisticsReport compute_statistics(const std::map<std::string, std::vector<AnnotatedSentence>>& dataset) {
  StatisticsReport r;
  for (const auto& [split, sentences] : dataset) r.splits[split] = compute_split_statistics(sentences);
  return r;
}

SplitStatistics StatisticsReport::total() const {
  SplitStatistics t;
  for (const auto& [_, s] : splits) t += s;
  return t;
}

namespace {

json split_json(const SplitStatistics& s) {
  return {{"POS", s.pos},       {"NEG", s.neg},           {"NEU", s.neu},
          {"Single", s.single}, {"Multi", s.multi},       {"MultiPol", s.multipol},
          {"Overlap", s.overlap}, {"Sentences", s.sentences}};
}

}  // namespace

json StatisticsReport::to_json() const {
  json j;
  for (const auto& [name, s] : splits) j[name] = split_json(s);
  j["total"] = split_json(total());
  return j;
}

// ---------------------------------------------------------------------------

std::vector<std::string> dataset_components(const std::string& dataset) {
  if (dataset == "rest-all") return {"14rest", "15rest", "16rest"};
  if (dataset == "14lap" || dataset == "14rest" || dataset == "15rest" || dataset == "16rest") return {dataset};
  throw Error("unknown dataset '" + dataset + "' (expected 14lap, 14rest, 15rest, 16rest or rest-all)");
}

std::optional<std::pair<std::filesystem::path, DatasetFormat>> find_split_file(
    const std::filesystem::path& data_dir, const std::string& component, const std::string& split) {
  std::vector<std::string> dirs{component};
  if (component.ends_with("rest")) dirs.push_back(component.substr(0, component.size() - 1));
  for (const auto& d : dirs) {
    const auto base = data_dir / d;
    if (auto p = base / (split + ".jsonl"); std::filesystem::is_regular_file(p)) {
      return std::pair{p, DatasetFormat::Canonical};
    }
    if (auto p = base / (split + "_triplets.txt"); std::filesystem::is_regular_file(p)) {
      return std::pair{p, DatasetFormat::Published};
    }
  }
  return std::nullopt;
}

std::vector<AnnotatedSentence> load_split(const std::filesystem::path& data_dir, const std::string& dataset,
                                          const std::string& split) {
  std::vector<AnnotatedSentence> out;
  for (const auto& component : dataset_components(dataset)) {
    auto found = find_split_file(data_dir, component, split);
    if (!found) {
      throw Error("no " + split + " file for " + component + " under " + data_dir.string() + " (looked for " +
                  split + ".jsonl and " + split + "_triplets.txt)");
    }
    auto part = import_dataset(found->first, found->second);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

}  // namespace paste
