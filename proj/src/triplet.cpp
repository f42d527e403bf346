#include "paste/triplet.hpp"

#include <algorithm>
#include <tuple>

namespace paste {

std::string_view to_string(Sentiment s) {
  switch (s) {
    case Sentiment::POS: return "POS";
    case Sentiment::NEG: return "NEG";
    case Sentiment::NEU: return "NEU";
    case Sentiment::NONE: return "NONE";
  }
  return "?";
}

Sentiment parse_sentiment(std::string_view text, bool allow_none) {
  if (text == "POS") return Sentiment::POS;
  if (text == "NEG") return Sentiment::NEG;
  if (text == "NEU") return Sentiment::NEU;
  if (allow_none && text == "NONE") return Sentiment::NONE;
  throw Error("unknown sentiment label '" + std::string(text) + "'");
}

std::string to_string(const OpinionTriplet& t) {
  return "(" + std::to_string(t.aspect.start) + "," + std::to_string(t.aspect.end) + "," +
         std::to_string(t.opinion.start) + "," + std::to_string(t.opinion.end) + "," +
         std::string(to_string(t.sentiment)) + ")";
}

std::string_view to_string(Direction d) {
  return d == Direction::AspectFirst ? "af" : "of";
}

Direction parse_direction(std::string_view text) {
  if (text == "af" || text == "AF" || text == "aspect_first") return Direction::AspectFirst;
  if (text == "of" || text == "OF" || text == "opinion_first") return Direction::OpinionFirst;
  throw Error("unknown generation direction '" + std::string(text) + "' (expected af or of)");
}

std::string_view to_string(TripletFault f) {
  switch (f) {
    case TripletFault::IndexOutOfRange: return "index out of range";
    case TripletFault::InvertedSpan: return "inverted span";
    case TripletFault::SpanOverlap: return "aspect and opinion spans overlap";
    case TripletFault::SentinelSentiment: return "NONE sentiment in gold data";
  }
  return "?";
}

namespace {

TripletVerdict fail(TripletFault f, const OpinionTriplet& t, const std::string& detail) {
  return {f, std::string(to_string(f)) + " in " + to_string(t) + ": " + detail};
}

}  // namespace

TripletVerdict validate_triplet(const OpinionTriplet& t, int n) {
  if (n < 2) throw Error("validate_triplet: sentence length must be >= 2, got " + std::to_string(n));

  for (const auto& [name, span] : {std::pair{"aspect", t.aspect}, std::pair{"opinion", t.opinion}}) {
    for (int idx : {span.start, span.end}) {
      if (idx < 0 || idx >= n) {
        return fail(TripletFault::IndexOutOfRange, t,
                    std::string(name) + " index " + std::to_string(idx) + " not in [0, " +
                        std::to_string(n) + ")");
      }
    }
    if (span.start > span.end) {
      return fail(TripletFault::InvertedSpan, t, std::string(name) + " start > end");
    }
  }
  if (t.aspect.intersects(t.opinion)) {
    const int at = std::max(t.aspect.start, t.opinion.start);
    return fail(TripletFault::SpanOverlap, t, "shared index " + std::to_string(at));
  }
  if (t.sentiment == Sentiment::NONE) {
    return fail(TripletFault::SentinelSentiment, t, "NONE is reserved for decoding");
  }
  return {};
}

std::vector<OpinionTriplet> sort_targets(std::span<const OpinionTriplet> triplets, Direction dir) {
  std::vector<OpinionTriplet> out(triplets.begin(), triplets.end());
  auto key = [dir](const OpinionTriplet& t) {
    const Span& first = dir == Direction::AspectFirst ? t.aspect : t.opinion;
    const Span& second = dir == Direction::AspectFirst ? t.opinion : t.aspect;
    return std::tuple{first.start, second.start, first.end, second.end, static_cast<int>(t.sentiment)};
  };
  std::stable_sort(out.begin(), out.end(),
                   [&](const OpinionTriplet& a, const OpinionTriplet& b) { return key(a) < key(b); });
  return out;
}

SentenceFlags classify_sentence(std::span<const OpinionTriplet> triplets) {
  if (triplets.empty()) throw Error("classify_sentence: sentence has no gold triplets");

  SentenceFlags flags;
  flags.is_multi = triplets.size() >= 2;
  flags.is_single = !flags.is_multi;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    for (std::size_t j = i + 1; j < triplets.size(); ++j) {
      if (triplets[i].sentiment != triplets[j].sentiment) flags.is_multipol = true;
      if (triplets[i].aspect == triplets[j].aspect || triplets[i].opinion == triplets[j].opinion) {
        flags.is_overlap = true;
      }
    }
  }
  return flags;
}

}  // namespace paste
