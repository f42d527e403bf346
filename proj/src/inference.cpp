#include "paste/inference.hpp"

#include <algorithm>
#include <optional>

namespace paste {

namespace {

struct Candidate {
  Span span;
  double value = -1.0;
};

/// Best start*end span inside [lo, hi], excluding `forbidden` if given.
/// Linear scan with a running argmax over starts.
std::optional<Candidate> best_span(std::span<const double> start, std::span<const double> end, int lo, int hi,
                                   std::optional<Span> forbidden = std::nullopt) {
  std::optional<Candidate> best;
  int arg = lo;
  for (int k = lo; k <= hi; ++k) {
    if (start[k] > start[arg]) arg = k;
    Span cand{arg, k};
    double v = start[arg] * end[k];
    if (forbidden && cand == *forbidden) {
      // Only the full range is ever forbidden; fall back to the best start
      // strictly after lo for this end position.
      if (k == lo) continue;
      int alt = lo + 1;
      for (int j = lo + 2; j <= k; ++j) {
        if (start[j] > start[alt]) alt = j;
      }
      cand = {alt, k};
      v = start[alt] * end[k];
    }
    if (!best || v > best->value || (v == best->value && cand < best->span)) best = Candidate{cand, v};
  }
  return best;
}

/// Best span that does not intersect `taken`; left side wins ties since its
/// starts are smaller.
std::optional<Candidate> best_disjoint(std::span<const double> start, std::span<const double> end, int n,
                                       const Span& taken) {
  auto left = best_span(start, end, 0, taken.start - 1);
  auto right = best_span(start, end, taken.end + 1, n - 1);
  if (!left) return right;
  if (!right) return left;
  return right->value > left->value ? right : left;
}

}  // namespace

SpanSelection select_spans(std::span<const double> aspect_start, std::span<const double> aspect_end,
                           std::span<const double> opinion_start, std::span<const double> opinion_end) {
  const auto n = static_cast<int>(aspect_start.size());
  if (aspect_end.size() != aspect_start.size() || opinion_start.size() != aspect_start.size() ||
      opinion_end.size() != aspect_start.size()) {
    throw Error("select_spans: distributions differ in length");
  }
  if (n < 2) throw Error("select_spans: need at least two tokens for disjoint spans");

  const Span whole{0, n - 1};
  auto product = [&](const Span& a, const Span& o) {
    return (aspect_start[a.start] * aspect_end[a.end]) * (opinion_start[o.start] * opinion_end[o.end]);
  };

  // Aspect first.
  const Span a1 = best_span(aspect_start, aspect_end, 0, n - 1, whole)->span;
  const Span o1 = best_disjoint(opinion_start, opinion_end, n, a1)->span;
  SpanSelection phase_a{a1, o1, product(a1, o1), true};

  // Opinion first.
  const Span o2 = best_span(opinion_start, opinion_end, 0, n - 1, whole)->span;
  const Span a2 = best_disjoint(aspect_start, aspect_end, n, o2)->span;
  SpanSelection phase_b{a2, o2, product(a2, o2), false};

  return phase_b.score > phase_a.score ? phase_b : phase_a;
}

template <typename T>
Sentiment argmax_sentiment(const ad::Vector<T>& dist) {
  if (dist.size() != kNumSentimentClasses) throw Error("sentiment distribution must have 4 entries");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < dist.size(); ++i) {
    if (dist(i) > dist(best)) best = i;
  }
  return static_cast<Sentiment>(best);
}

template <typename T>
std::vector<OpinionTriplet> triplets_from_steps(const std::vector<DecoderStepOutput<T>>& steps) {
  std::vector<OpinionTriplet> out;
  for (const auto& st : steps) {
    const Sentiment label = argmax_sentiment(st.sentiment);
    if (label == Sentiment::NONE) break;
    auto as_double = [](const ad::Vector<T>& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    const auto sa = as_double(st.aspect_start), ea = as_double(st.aspect_end);
    const auto so = as_double(st.opinion_start), eo = as_double(st.opinion_end);
    const SpanSelection sel = select_spans(sa, ea, so, eo);
    const OpinionTriplet t{sel.aspect, sel.opinion, label};
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  return out;
}

template <typename T>
std::vector<OpinionTriplet> decode_triplets(PasteModel<T>& model, const EncodedSentence& sentence) {
  if (sentence.size() < 2) return {};
  return triplets_from_steps(model.run(sentence, model.config().max_steps));
}

template Sentiment argmax_sentiment(const ad::Vector<float>&);
template Sentiment argmax_sentiment(const ad::Vector<double>&);
template std::vector<OpinionTriplet> triplets_from_steps(const std::vector<DecoderStepOutput<float>>&);
template std::vector<OpinionTriplet> triplets_from_steps(const std::vector<DecoderStepOutput<double>>&);
template std::vector<OpinionTriplet> decode_triplets(PasteModel<float>&, const EncodedSentence&);
template std::vector<OpinionTriplet> decode_triplets(PasteModel<double>&, const EncodedSentence&);

}  // namespace paste
