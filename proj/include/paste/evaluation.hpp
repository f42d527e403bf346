#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "paste/triplet.hpp"

namespace paste {

/// Micro-averaged precision/recall/F1 with the underlying counts.
struct Prf {
  long tp = 0;
  long predicted = 0;
  long gold = 0;

  double precision() const { return predicted == 0 ? 0.0 : static_cast<double>(tp) / predicted; }
  double recall() const { return gold == 0 ? 0.0 : static_cast<double>(tp) / gold; }
  double f1() const;
  Prf& operator+=(const Prf& o);
  nlohmann::json to_json() const;
};

using TripletSets = std::vector<std::vector<OpinionTriplet>>;

/// Exact 5-tuple matching, micro-averaged over sentences. Both sides are
/// deduplicated per sentence first.
Prf score_exact_match(const TripletSets& pred, const TripletSets& gold);

struct ElementScores {
  Prf aspect;
  Prf opinion;
  /// Predicted triplets whose (aspect, opinion) pair matches a gold pair.
  long pair_matched = 0;
  /// ... of which the sentiment also matches.
  long sentiment_correct = 0;

  double sentiment_accuracy() const {
    return pair_matched == 0 ? 0.0 : static_cast<double>(sentiment_correct) / pair_matched;
  }
};

ElementScores score_elements(const TripletSets& pred, const TripletSets& gold);

inline const std::vector<std::string>& split_categories() {
  static const std::vector<std::string> names{"Single", "Multi", "MultiPol", "Overlap"};
  return names;
}

/// Micro-F1 restricted to each sentence category. Categories with no
/// sentences are absent from the result.
std::map<std::string, Prf> split_scores(const TripletSets& pred, const TripletSets& gold,
                                        const std::vector<SentenceFlags>& flags);

struct EvalReport {
  Prf overall;
  std::map<std::string, Prf> splits;
  ElementScores elements;

  nlohmann::json to_json() const;
  /// Aligned text table: overall, split-wise F1, element-wise scores.
  std::string to_text() const;
};

EvalReport evaluate(const TripletSets& pred, const TripletSets& gold, const std::vector<SentenceFlags>& flags);

/// Sanity check of a report object: required keys, values in [0, 1],
/// F1 consistent with P and R. Returns an empty string when valid.
std::string validate_report_json(const nlohmann::json& report);

}  // namespace paste
