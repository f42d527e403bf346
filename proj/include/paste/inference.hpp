#pragma once

#include <span>
#include <vector>

#include "paste/model.hpp"
#include "paste/triplet.hpp"

namespace paste {

struct SpanSelection {
  Span aspect;
  Span opinion;
  /// S_ap[as] * E_ap[ae] * S_op[os] * E_op[oe]
  double score = 0.0;
  /// True when the aspect-first pass won (ties go to it).
  bool aspect_first = true;
};

/// Picks a disjoint (aspect, opinion) span pair from the four pointer
/// distributions. Each pass maximizes start*end for one entity, then the best
/// span of the other entity that avoids it; the pass with the larger
/// four-way product wins. Within a pass the first span may not cover the
/// whole sentence, which would leave no room for the second. Ties prefer the
/// aspect-first pass, then smaller start, then smaller end.
/// Throws Error if n < 2 or the vectors differ in length.
SpanSelection select_spans(std::span<const double> aspect_start, std::span<const double> aspect_end,
                           std::span<const double> opinion_start, std::span<const double> opinion_end);

/// Index of the most probable sentiment (lowest index on ties).
template <typename T>
Sentiment argmax_sentiment(const ad::Vector<T>& dist);

/// Turns decoder outputs into triplets: stops at the first NONE step and
/// drops exact duplicates, keeping first occurrences.
template <typename T>
std::vector<OpinionTriplet> triplets_from_steps(const std::vector<DecoderStepOutput<T>>& steps);

/// Runs the model for config().max_steps steps and decodes. Sentences with
/// fewer than two tokens yield no triplets.
template <typename T>
std::vector<OpinionTriplet> decode_triplets(PasteModel<T>& model, const EncodedSentence& sentence);

}  // namespace paste
