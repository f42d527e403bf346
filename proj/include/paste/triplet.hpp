#pragma once

#include <compare>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace paste {

/// Error raised for malformed data, bad configuration, or contract violations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sentiment polarity of a triplet. NONE is the decoder's stop sentinel and
/// never appears in gold data.
enum class Sentiment : int { POS = 0, NEG = 1, NEU = 2, NONE = 3 };

inline constexpr int kNumSentimentClasses = 4;

std::string_view to_string(Sentiment s);
/// Parses "POS", "NEG" or "NEU" (and "NONE" when allow_none).
Sentiment parse_sentiment(std::string_view text, bool allow_none = false);

/// Inclusive token range [start, end].
struct Span {
  int start = 0;
  int end = 0;

  friend auto operator<=>(const Span&, const Span&) = default;
  bool contains(int i) const { return start <= i && i <= end; }
  bool intersects(const Span& o) const { return start <= o.end && o.start <= end; }
};

/// (aspect start, aspect end, opinion start, opinion end, sentiment), 0-based
/// inclusive token positions.
struct OpinionTriplet {
  Span aspect;
  Span opinion;
  Sentiment sentiment = Sentiment::POS;

  friend auto operator<=>(const OpinionTriplet&, const OpinionTriplet&) = default;
};

std::string to_string(const OpinionTriplet& t);

enum class Direction { AspectFirst, OpinionFirst };

std::string_view to_string(Direction d);
/// Accepts "af"/"of" and the long names.
Direction parse_direction(std::string_view text);

struct SentenceFlags {
  bool is_single = false;
  bool is_multi = false;
  bool is_multipol = false;
  bool is_overlap = false;

  friend bool operator==(const SentenceFlags&, const SentenceFlags&) = default;
};

enum class TripletFault {
  IndexOutOfRange,
  InvertedSpan,
  SpanOverlap,
  SentinelSentiment,
};

std::string_view to_string(TripletFault f);

struct TripletVerdict {
  std::optional<TripletFault> fault;
  std::string message;

  bool ok() const { return !fault.has_value(); }
  explicit operator bool() const { return ok(); }
};

/// Checks a gold triplet against a sentence of n tokens.
/// Throws Error if n < 2 (two disjoint spans need at least two tokens).
TripletVerdict validate_triplet(const OpinionTriplet& t, int n);

/// Orders targets by the start of the entity generated first; ties fall back
/// to the other span's start, then the end positions.
std::vector<OpinionTriplet> sort_targets(std::span<const OpinionTriplet> triplets, Direction dir);

/// Throws Error on an empty list.
SentenceFlags classify_sentence(std::span<const OpinionTriplet> triplets);

}  // namespace paste
