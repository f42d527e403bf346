#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "paste/corpus.hpp"
#include "paste/inference.hpp"
#include "paste/model.hpp"
#include "paste/training.hpp"

namespace paste::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(PASTE_FIXTURE_DIR) / name;
}

inline OpinionTriplet trip(int as, int ae, int os, int oe, Sentiment s) { return {{as, ae}, {os, oe}, s}; }

/// Random probability vector; `peaky` sharpens it so argmaxes are distinct.
inline std::vector<double> random_distribution(std::mt19937_64& rng, int n, bool peaky = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  double total = 0.0;
  for (auto& x : v) {
    x = peaky ? std::pow(u(rng), 4.0) + 1e-6 : u(rng) + 1e-6;
    total += x;
  }
  for (auto& x : v) x /= total;
  return v;
}

/// Random well-formed triplet in a sentence of n >= 2 tokens.
inline OpinionTriplet random_triplet(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> cut(1, n - 1);
  const int split = cut(rng);
  auto span_in = [&](int lo, int hi) {
    std::uniform_int_distribution<int> pick(lo, hi);
    int a = pick(rng), b = pick(rng);
    if (a > b) std::swap(a, b);
    return Span{a, b};
  };
  Span left = span_in(0, split - 1), right = span_in(split, n - 1);
  if (std::bernoulli_distribution(0.5)(rng)) std::swap(left, right);
  std::uniform_int_distribution<int> label(0, 2);
  return {left, right, static_cast<Sentiment>(label(rng))};
}

inline std::vector<OpinionTriplet> random_triplets(std::mt19937_64& rng, int n, int count) {
  std::vector<OpinionTriplet> out;
  for (int k = 0; k < count; ++k) out.push_back(random_triplet(rng, n));
  return out;
}

/// Exhaustive two-phase reference for select_spans: every first span except
/// the whole sentence, then every disjoint second span, both by double loops.
inline SpanSelection brute_force_select(const std::vector<double>& sa, const std::vector<double>& ea,
                                        const std::vector<double>& so, const std::vector<double>& eo) {
  const int n = static_cast<int>(sa.size());
  auto phase = [&](const std::vector<double>& s1, const std::vector<double>& e1, const std::vector<double>& s2,
                   const std::vector<double>& e2) {
    double best1 = -1.0;
    Span first{};
    for (int j = 0; j < n; ++j) {
      for (int k = j; k < n; ++k) {
        if (j == 0 && k == n - 1) continue;
        const double v = s1[j] * e1[k];
        if (v > best1) {
          best1 = v;
          first = {j, k};
        }
      }
    }
    double best2 = -1.0;
    Span second{};
    for (int j = 0; j < n; ++j) {
      for (int k = j; k < n; ++k) {
        if (Span{j, k}.intersects(first)) continue;
        const double v = s2[j] * e2[k];
        if (v > best2) {
          best2 = v;
          second = {j, k};
        }
      }
    }
    return std::tuple{first, second, best1 * best2};
  };
  const auto [a1, o1, score_a] = phase(sa, ea, so, eo);
  const auto [o2, a2, score_b] = phase(so, eo, sa, ea);
  if (score_b > score_a) return {a2, o2, score_b, false};
  return {a1, o1, score_a, true};
}

inline ModelConfig tiny_config(Direction dir = Direction::AspectFirst) {
  ModelConfig c;
  c.d_w = 4;
  c.d_pos = 4;
  c.d_dep = 4;
  c.d_h = 8;
  c.d_p = 8;
  c.dropout = 0.0;
  c.direction = dir;
  c.max_steps = 3;
  return c;
}

/// Overwrites every parameter with uniform(-bound, bound) draws. Gradient
/// checks run here so no tensor's gradient sits at the finite-difference
/// rounding level.
template <typename T>
void randomize_params(PasteModel<T>& model, double bound, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (const auto& name : model.params().names()) {
    auto& v = model.params().at(name).value;
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = static_cast<T>(u(rng));
  }
}

inline EncodedSentence random_encoded(std::mt19937_64& rng, int n, int vocab, int pos, int dep) {
  std::uniform_int_distribution<int> w(0, vocab - 1), p(0, pos - 1), d(0, dep - 1);
  EncodedSentence s;
  for (int i = 0; i < n; ++i) {
    s.words.push_back(w(rng));
    s.pos.push_back(p(rng));
    s.dep.push_back(d(rng));
  }
  return s;
}

/// Converts aspect-first parameters into opinion-first ones computing the
/// same first/second distributions: the two pointer networks trade names,
/// and every weight block reading tup = [ap ; op] has its halves swapped.
template <typename T>
ParamStore<T> swap_direction(const ParamStore<T>& src, const ModelConfig& c) {
  ParamStore<T> out;
  const int half = 2 * c.d_p;
  auto swap_cols = [&](ad::Matrix<T> m, int offset) {
    ad::Matrix<T> a = m.middleCols(offset, half), b = m.middleCols(offset + half, half);
    m.middleCols(offset, half) = b;
    m.middleCols(offset + half, half) = a;
    return m;
  };
  for (const auto& name : src.names()) {
    ad::Matrix<T> value = src.at(name).value;
    std::string target = name;
    if (name.rfind("aspect_ptr.", 0) == 0) target = "opinion_ptr." + name.substr(11);
    if (name.rfind("opinion_ptr.", 0) == 0) target = "aspect_ptr." + name.substr(12);
    if (name == "attn.W_tup") value = swap_cols(value, 0);
    if (name == "decoder.Wx") value = swap_cols(value, c.d_h);
    if (name == "sentiment.W") value = swap_cols(value, 0);
    out.add(target, std::move(value));
  }
  return out;
}

inline std::vector<AnnotatedSentence> toy_train() {
  return import_dataset(fixture("toy_annotated/14lap/train.jsonl"), DatasetFormat::Canonical);
}

inline ModelConfig overfit_config() {
  ModelConfig c;
  c.d_w = 16;
  c.d_pos = 8;
  c.d_dep = 8;
  c.d_h = 32;
  c.d_p = 32;
  c.dropout = 0.0;
  return c;
}

inline TrainConfig overfit_train_config() {
  TrainConfig t;
  t.learning_rate = 1e-2;
  t.epochs = 300;
  t.runs = 1;
  t.seed = 13;
  return t;
}

}  // namespace paste::testing
