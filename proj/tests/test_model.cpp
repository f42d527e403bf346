#include <doctest.h>

#include <cmath>
#include <random>

#include "paste/model.hpp"
#include "support.hpp"

using namespace paste;
using paste::testing::random_encoded;
using paste::testing::tiny_config;

namespace {

constexpr int kVocab = 11, kPos = 5, kDep = 6;

PasteModel<double> random_model(std::uint64_t seed, Direction dir = Direction::AspectFirst) {
  PasteModel<double> m(tiny_config(dir), kVocab, kPos, kDep);
  m.init_random(seed);
  return m;
}

/// Plain-loop transcription of the two-score attention.
std::vector<double> reference_attention(const ParamStore<double>& p, const ad::Matrix<double>& H,
                                        const std::vector<double>& h_prev, const std::vector<double>& tup_prev) {
  const auto& W_tup = p.at("attn.W_tup").value;
  const auto& b_tup = p.at("attn.b_tup").value;
  const auto& W_u = p.at("attn.W_u").value;
  const auto& W_qt = p.at("attn.W_qt").value;
  const auto& b_qt = p.at("attn.b_qt").value;
  const auto& W_q = p.at("attn.W_q").value;
  const auto& b_q = p.at("attn.b_q").value;
  const auto& v_qt = p.at("attn.v_qt").value;
  const auto& v_q = p.at("attn.v_q").value;
  const int dh = static_cast<int>(H.rows()), n = static_cast<int>(H.cols());

  std::vector<double> tproj(dh), qt(dh), q(dh);
  for (int r = 0; r < dh; ++r) {
    double acc = b_tup(r, 0);
    for (std::size_t c = 0; c < tup_prev.size(); ++c) acc += W_tup(r, c) * tup_prev[c];
    tproj[r] = acc;
  }
  for (int r = 0; r < dh; ++r) {
    double a = b_qt(r, 0), b = b_q(r, 0);
    for (int c = 0; c < dh; ++c) {
      a += W_qt(r, c) * tproj[c];
      b += W_q(r, c) * h_prev[c];
    }
    qt[r] = a;
    q[r] = b;
  }
  std::vector<double> st(n), sh(n);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < dh; ++r) {
      double u = 0.0;
      for (int c = 0; c < dh; ++c) u += W_u(r, c) * H(c, i);
      st[i] += v_qt(0, r) * std::tanh(qt[r] + u);
      sh[i] += v_q(0, r) * std::tanh(q[r] + u);
    }
  }
  auto softmax = [](std::vector<double> v) {
    double mx = *std::max_element(v.begin(), v.end()), z = 0.0;
    for (auto& x : v) z += (x = std::exp(x - mx));
    for (auto& x : v) x /= z;
    return v;
  };
  st = softmax(st);
  sh = softmax(sh);
  std::vector<double> ctx(dh, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < dh; ++r) ctx[r] += 0.5 * (st[i] + sh[i]) * H(r, i);
  }
  return ctx;
}

}  // namespace

TEST_CASE("model config validation and serialization") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.input_dim() == 400);
  CHECK(ModelConfig::from_json(c.to_json()) == c);
  auto bad = c;
  bad.d_h = 301;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.d_p = 7;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.max_steps = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("parameter shapes under default dimensions") {
  PasteModel<float> m(ModelConfig{}, 50, 10, 12);
  const auto& p = m.params();
  CHECK(p.at("attn.W_tup").value.rows() == 300);
  CHECK(p.at("attn.W_tup").value.cols() == 1200);
  CHECK(p.at("attn.v_qt").value.size() == 300);
  CHECK(p.at("aspect_ptr.W_s").value.cols() == 300);
  CHECK(p.at("aspect_ptr.W_e").value.rows() == 1);
  CHECK(p.at("aspect_ptr.fw.Wx").value.cols() == 600);
  CHECK(p.at("opinion_ptr.fw.Wx").value.cols() == 900);
  CHECK(p.at("decoder.Wx").value.cols() == 1500);
  CHECK(p.at("embed.word").value.cols() == 300);
}

TEST_CASE("default-size forward shapes") {
  PasteModel<float> m(ModelConfig{}, 20, 5, 5);
  m.init_random(1);
  std::mt19937_64 rng(2);
  const auto s = random_encoded(rng, 5, 20, 5, 5);
  ad::Graph<float> g;
  const auto H = m.encode_sentence(g, s);
  CHECK(g.value(H).rows() == 300);
  CHECK(g.value(H).cols() == 5);
  const auto out = m.run(s, 1);
  CHECK(out[0].aspect_vec.size() == 600);
  CHECK(out[0].opinion_vec.size() == 600);
  CHECK(out[0].tuple_vec.size() == 1200);
  CHECK(out[0].hidden.size() == 300);
}

TEST_CASE("encoder requires annotation when tag features are on") {
  AnnotatedSentence s;
  s.tokens = {"good", "food"};
  s.gold = {paste::testing::trip(1, 1, 0, 0, Sentiment::POS)};
  const auto vocab = Vocabulary::from_keys({"<unk>", "<pad>", "good", "food"}, {"<unk>", "JJ"}, {"<unk>", "amod"});
  CHECK_THROWS_AS(encode_ids(s, vocab, ModelConfig{}), Error);
  ModelConfig words_only;
  words_only.d_pos = words_only.d_dep = 0;
  const auto ids = encode_ids(s, vocab, words_only);
  CHECK(ids.words == std::vector<int>{vocab.words.lookup("good"), vocab.words.lookup("food")});
}

TEST_CASE("distributions are normalized and shapes hold for random parameters") {
  std::mt19937_64 rng(17);
  for (int draw = 0; draw < 20; ++draw) {
    auto m = random_model(1000 + draw, draw % 2 ? Direction::OpinionFirst : Direction::AspectFirst);
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    const auto out = m.run(random_encoded(rng, n, kVocab, kPos, kDep), 3);
    REQUIRE(out.size() == 3);
    for (const auto& st : out) {
      for (const auto* v : {&st.aspect_start, &st.aspect_end, &st.opinion_start, &st.opinion_end}) {
        CHECK(v->size() == n);
        CHECK(std::abs(v->sum() - 1.0) < 1e-9);
        CHECK(v->minCoeff() >= 0.0);
      }
      CHECK(std::abs(st.sentiment.sum() - 1.0) < 1e-9);
      CHECK(st.tuple_vec.head(16) == st.aspect_vec);
      CHECK(st.tuple_vec.tail(16) == st.opinion_vec);
    }
    CHECK(out[0].tuple_prev.isZero(0.0));
    CHECK(out[1].tuple_prev == out[0].tuple_vec);
    CHECK(out[2].tuple_prev == out[0].tuple_vec + out[1].tuple_vec);
  }
}

TEST_CASE("attention matches the scalar reference") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_model(50 + trial);
    const int n = std::uniform_int_distribution<int>(1, 7)(rng);
    ad::Graph<double> g;
    const auto H = m.encode_sentence(g, random_encoded(rng, n, kVocab, kPos, kDep));
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> h(8), tup(32);
    for (auto& x : h) x = u(rng);
    for (auto& x : tup) x = u(rng);
    const auto att = m.attention_step(g, H, g.constant(Eigen::Map<ad::Matrix<double>>(h.data(), 8, 1)),
                                      g.constant(Eigen::Map<ad::Matrix<double>>(tup.data(), 32, 1)));
    const auto ref = reference_attention(m.params(), g.value(H), h, tup);
    for (int r = 0; r < 8; ++r) CHECK(std::abs(g.value(att.context)(r, 0) - ref[r]) < 1e-6);
    const double combined = 0.5 * (g.value(att.alpha_tuple).sum() + g.value(att.alpha_hidden).sum());
    CHECK(std::abs(combined - 1.0) < 1e-12);
    if (n == 1) {
      CHECK(g.value(att.alpha_tuple)(0, 0) == doctest::Approx(1.0));
      CHECK((g.value(att.context) - g.value(H)).norm() < 1e-12);
    }
  }
}

TEST_CASE("single-token attention returns the encoder state") {
  auto m = random_model(3);
  std::mt19937_64 rng(1);
  ad::Graph<double> g;
  const auto H = m.encode_sentence(g, random_encoded(rng, 1, kVocab, kPos, kDep));
  const auto att = m.attention_step(g, H, g.zeros(8, 1), g.zeros(32, 1));
  CHECK(g.value(att.alpha_tuple)(0, 0) == 1.0);
  CHECK(g.value(att.alpha_hidden)(0, 0) == 1.0);
  CHECK((g.value(att.context) - g.value(H)).norm() < 1e-12);
  CHECK_THROWS_AS(m.attention_step(g, H, g.zeros(7, 1), g.zeros(32, 1)), Error);
}

TEST_CASE("decoder step dimension checks") {
  auto m = random_model(4);
  ad::Graph<double> g;
  CHECK_THROWS_AS(m.decoder_step(g, g.zeros(8, 1), g.zeros(31, 1), g.zeros(8, 1), g.zeros(8, 1)), Error);
  const auto [h, c] = m.decoder_step(g, g.zeros(8, 1), g.zeros(32, 1), g.zeros(8, 1), g.zeros(8, 1));
  CHECK(g.value(h).rows() == 8);
  CHECK(g.value(c).rows() == 8);
}

TEST_CASE("zero parameters give zero states and uniform distributions") {
  PasteModel<double> m(tiny_config(), kVocab, kPos, kDep);
  m.init_zero();
  std::mt19937_64 rng(9);
  const auto s = random_encoded(rng, 5, kVocab, kPos, kDep);
  ad::Graph<double> g;
  CHECK(g.value(m.encode_sentence(g, s)).isZero(0.0));
  const auto out = m.run(s, 3);
  for (const auto& st : out) {
    CHECK(st.hidden.isZero(0.0));
    CHECK(st.tuple_vec.isZero(0.0));
    for (const auto* v : {&st.aspect_start, &st.aspect_end, &st.opinion_start, &st.opinion_end}) {
      for (int i = 0; i < 5; ++i) CHECK((*v)(i) == doctest::Approx(0.2).epsilon(1e-12));
    }
    for (int k = 0; k < 4; ++k) CHECK(st.sentiment(k) == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("uniform pointer weights give mean-state span vectors") {
  auto m = random_model(31);
  for (const std::string ptr : {"aspect_ptr", "opinion_ptr"}) {
    for (const std::string w : {".W_s", ".b_s", ".W_e", ".b_e"}) m.params().at(ptr + w).value.setZero();
  }
  std::mt19937_64 rng(4);
  ad::Graph<double> g;
  const auto H = m.encode_sentence(g, random_encoded(rng, 4, kVocab, kPos, kDep));
  ad::Matrix<double> h = ad::Matrix<double>::Random(8, 1);
  const auto [first, second] = m.pointer_pass(g, H, g.constant(h));
  for (const auto* ptr : {&first, &second}) {
    const ad::Matrix<double> mean = g.value(ptr->states).rowwise().mean();
    const auto& v = g.value(ptr->span_vec);
    CHECK((v.topRows(8) - mean).norm() < 1e-12);
    CHECK((v.bottomRows(8) - mean).norm() < 1e-12);
    CHECK(g.value(ptr->start).sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("classifier with zero weights is uniform") {
  auto m = random_model(8);
  m.params().at("sentiment.W").value.setZero();
  m.params().at("sentiment.b").value.setZero();
  ad::Graph<double> g;
  const auto d = g.value(m.classify_sentiment(g, g.constant(ad::Matrix<double>::Random(32, 1)), g.zeros(8, 1)));
  for (int k = 0; k < 4; ++k) CHECK(d(k, 0) == 0.25);
}

TEST_CASE("evaluation mode is deterministic; dropout only with an rng") {
  auto m = random_model(12);
  m.mutable_config().dropout = 0.5;
  std::mt19937_64 rng(3);
  const auto s = random_encoded(rng, 6, kVocab, kPos, kDep);
  const auto a = m.run(s, 2), b = m.run(s, 2);
  CHECK(a[1].sentiment == b[1].sentiment);
  CHECK(a[1].aspect_start == b[1].aspect_start);

  ad::Graph<double> g1, g2;
  std::mt19937_64 drop(1);
  const auto plain = g1.value(m.encode_sentence(g1, s));
  const auto noisy = g2.value(m.encode_sentence(g2, s, &drop));
  CHECK((plain - noisy).norm() > 1e-6);
}

TEST_CASE("direction symmetry under swapped pointer weights") {
  std::mt19937_64 rng(77);
  for (int draw = 0; draw < 10; ++draw) {
    auto af = random_model(300 + draw, Direction::AspectFirst);
    PasteModel<double> of(tiny_config(Direction::OpinionFirst), paste::testing::swap_direction(af.params(), af.config()));
    const auto s = random_encoded(rng, std::uniform_int_distribution<int>(2, 7)(rng), kVocab, kPos, kDep);
    const auto a = af.run(s, 3), o = of.run(s, 3);
    for (int t = 0; t < 3; ++t) {
      CHECK((a[t].first_start() - o[t].first_start()).norm() < 1e-12);
      CHECK((a[t].first_end() - o[t].first_end()).norm() < 1e-12);
      CHECK((a[t].second_start() - o[t].second_start()).norm() < 1e-12);
      CHECK((a[t].second_end() - o[t].second_end()).norm() < 1e-12);
      CHECK((a[t].sentiment - o[t].sentiment).norm() < 1e-12);
    }
  }
}

TEST_CASE("forward needs at least one step") {
  auto m = random_model(1);
  std::mt19937_64 rng(1);
  ad::Graph<double> g;
  CHECK_THROWS_AS(m.forward(g, random_encoded(rng, 3, kVocab, kPos, kDep), 0), Error);
}

TEST_CASE("float and double models agree") {
  auto md = random_model(5);
  PasteModel<float> mf(md.config(), md.params().cast<float>());
  std::mt19937_64 rng(6);
  const auto s = random_encoded(rng, 6, kVocab, kPos, kDep);
  const auto d = md.run(s, 2);
  const auto f = mf.run(s, 2);
  CHECK((d[1].aspect_start - f[1].aspect_start.cast<double>()).norm() < 1e-5);
}
