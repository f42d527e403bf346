#include "paste/model.hpp"

#include <cmath>

namespace paste {

using nlohmann::json;

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error("invalid model config: " + m); };
  if (d_w <= 0) fail("d_w must be positive");
  if (d_pos < 0 || d_dep < 0) fail("d_pos and d_dep must be non-negative");
  if (d_h <= 0 || d_h % 2 != 0) fail("d_h must be positive and even");
  if (d_p <= 0 || d_p % 2 != 0) fail("d_p must be positive and even");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (max_steps < 1) fail("max_steps must be >= 1");
}

json ModelConfig::to_json() const {
  return {{"d_w", d_w},         {"d_pos", d_pos}, {"d_dep", d_dep},
          {"d_h", d_h},         {"d_p", d_p},     {"dropout", dropout},
          {"direction", std::string(to_string(direction))}, {"max_steps", max_steps}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.d_w = j.at("d_w").get<int>();
  c.d_pos = j.at("d_pos").get<int>();
  c.d_dep = j.at("d_dep").get<int>();
  c.d_h = j.at("d_h").get<int>();
  c.d_p = j.at("d_p").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.direction = parse_direction(j.at("direction").get<std::string>());
  c.max_steps = j.at("max_steps").get<int>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

template <typename T>
ad::Parameter<T>& ParamStore<T>::add(const std::string& name, Mat value) {
  auto [it, inserted] = index_.try_emplace(name);
  if (!inserted) throw Error("duplicate parameter " + name);
  it->second.value = std::move(value);
  it->second.zero_grad();
  order_.push_back(name);
  return it->second;
}

template <typename T>
ad::Parameter<T>& ParamStore<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return it->second;
}

template <typename T>
const ad::Parameter<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : index_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [_, p] : index_) p.zero_grad();
}

template <typename T>
template <typename U>
ParamStore<U> ParamStore<T>::cast() const {
  ParamStore<U> out;
  for (const auto& name : order_) out.add(name, at(name).value.template cast<U>());
  return out;
}

template class ParamStore<float>;
template class ParamStore<double>;
template ParamStore<double> ParamStore<float>::cast<double>() const;
template ParamStore<float> ParamStore<double>::cast<float>() const;
template ParamStore<float> ParamStore<float>::cast<float>() const;
template ParamStore<double> ParamStore<double>::cast<double>() const;

// ---------------------------------------------------------------------------

EncodedSentence encode_ids(const AnnotatedSentence& s, const Vocabulary& vocab, const ModelConfig& config) {
  if (s.tokens.empty()) throw Error("cannot encode an empty sentence");
  const bool needs_tags = config.d_pos > 0 || config.d_dep > 0;
  if (needs_tags && !s.annotated()) {
    throw Error("sentence '" + s.tokens.front() + " ...' has no POS/DEP annotation");
  }
  EncodedSentence e;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    e.words.push_back(vocab.words.lookup(s.tokens[i]));
    e.pos.push_back(needs_tags ? vocab.pos.lookup(s.pos_tags[i]) : 0);
    e.dep.push_back(needs_tags ? vocab.dep.lookup(s.dep_labels[i]) : 0);
  }
  return e;
}

// ---------------------------------------------------------------------------

namespace {

std::string first_pointer(Direction d) { return d == Direction::AspectFirst ? "aspect_ptr" : "opinion_ptr"; }
std::string second_pointer(Direction d) { return d == Direction::AspectFirst ? "opinion_ptr" : "aspect_ptr"; }

}  // namespace

template <typename T>
PasteModel<T>::PasteModel(ModelConfig config, int vocab_size, int pos_size, int dep_size) : config_(config) {
  config_.validate();
  if (vocab_size < 2) throw Error("vocabulary must hold at least <unk> and <pad>");
  if (config_.d_pos > 0 && pos_size < 1) throw Error("POS tag set is empty");
  if (config_.d_dep > 0 && dep_size < 1) throw Error("DEP label set is empty");
  create_parameters(vocab_size, pos_size, dep_size);
}

template <typename T>
PasteModel<T>::PasteModel(ModelConfig config, ParamStore<T> params) : config_(config) {
  config_.validate();
  const int vocab = static_cast<int>(params.at("embed.word").value.rows());
  const int pos = config_.d_pos > 0 ? static_cast<int>(params.at("embed.pos").value.rows()) : 0;
  const int dep = config_.d_dep > 0 ? static_cast<int>(params.at("embed.dep").value.rows()) : 0;
  create_parameters(vocab, pos, dep);
  if (params.size() != params_.size()) throw Error("parameter set does not match the model configuration");
  for (const auto& name : params_.names()) {
    const auto& src = params.at(name).value;
    auto& dst = params_.at(name).value;
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
      throw Error("parameter " + name + " has shape " + std::to_string(src.rows()) + "x" +
                  std::to_string(src.cols()) + ", expected " + std::to_string(dst.rows()) + "x" +
                  std::to_string(dst.cols()));
    }
    dst = src;
  }
}

template <typename T>
void PasteModel<T>::add_param(const std::string& name, int rows, int cols, double init_bound) {
  params_.add(name, Mat::Zero(rows, cols));
  init_bound_[name] = init_bound;
}

template <typename T>
void PasteModel<T>::add_lstm(const std::string& prefix, int input, int hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  add_param(prefix + ".Wx", 4 * hidden, input, bound);
  add_param(prefix + ".Wh", 4 * hidden, hidden, bound);
  add_param(prefix + ".b", 4 * hidden, 1, bound);
}

template <typename T>
void PasteModel<T>::add_pointer(const std::string& prefix, int input) {
  const int half = config_.d_p / 2;
  add_lstm(prefix + ".fw", input, half);
  add_lstm(prefix + ".bw", input, half);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config_.d_p));
  add_param(prefix + ".W_s", 1, config_.d_p, bound);
  add_param(prefix + ".b_s", 1, 1, bound);
  add_param(prefix + ".W_e", 1, config_.d_p, bound);
  add_param(prefix + ".b_e", 1, 1, bound);
}

template <typename T>
void PasteModel<T>::create_parameters(int vocab_size, int pos_size, int dep_size) {
  const ModelConfig& c = config_;
  add_param("embed.word", vocab_size, c.d_w, 0.1);
  if (c.d_pos > 0) add_param("embed.pos", pos_size, c.d_pos, 0.1);
  if (c.d_dep > 0) add_param("embed.dep", dep_size, c.d_dep, 0.1);

  add_lstm("encoder.fw", c.input_dim(), c.d_h / 2);
  add_lstm("encoder.bw", c.input_dim(), c.d_h / 2);

  const double dh_bound = 1.0 / std::sqrt(static_cast<double>(c.d_h));
  const double tup_bound = 1.0 / std::sqrt(static_cast<double>(4 * c.d_p));
  add_param("attn.W_tup", c.d_h, 4 * c.d_p, tup_bound);
  add_param("attn.b_tup", c.d_h, 1, tup_bound);
  add_param("attn.W_u", c.d_h, c.d_h, dh_bound);
  add_param("attn.W_qt", c.d_h, c.d_h, dh_bound);
  add_param("attn.b_qt", c.d_h, 1, dh_bound);
  add_param("attn.W_q", c.d_h, c.d_h, dh_bound);
  add_param("attn.b_q", c.d_h, 1, dh_bound);
  add_param("attn.v_qt", 1, c.d_h, dh_bound);
  add_param("attn.v_q", 1, c.d_h, dh_bound);

  add_lstm("decoder", c.d_h + 4 * c.d_p, c.d_h);

  add_pointer(first_pointer(c.direction), 2 * c.d_h);
  add_pointer(second_pointer(c.direction), 2 * c.d_h + c.d_p);

  const double senti_bound = 1.0 / std::sqrt(static_cast<double>(4 * c.d_p + c.d_h));
  add_param("sentiment.W", kNumSentimentClasses, 4 * c.d_p + c.d_h, senti_bound);
  add_param("sentiment.b", kNumSentimentClasses, 1, senti_bound);
}

template <typename T>
void PasteModel<T>::init_random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& name : params_.names()) {
    const double b = init_bound_.at(name);
    std::uniform_real_distribution<double> dist(-b, b);
    auto& v = params_.at(name).value;
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, j) = static_cast<T>(dist(rng));
    }
  }
}

template <typename T>
void PasteModel<T>::init_zero() {
  for (const auto& name : params_.names()) params_.at(name).value.setZero();
}

template <typename T>
void PasteModel<T>::set_word_embeddings(const Mat& table) {
  auto& w = params_.at("embed.word").value;
  if (table.rows() != w.rows() || table.cols() != w.cols()) throw Error("word embedding table has the wrong shape");
  w = table;
}

// ---------------------------------------------------------------------------

template <typename T>
typename PasteModel<T>::LstmExprs PasteModel<T>::lstm_params(Graph& g, const std::string& prefix) {
  return {p(g, prefix + ".Wx"), p(g, prefix + ".Wh"), p(g, prefix + ".b")};
}

template <typename T>
std::pair<ad::Expr, ad::Expr> PasteModel<T>::lstm_cell(Graph& g, const LstmExprs& w, ad::Expr x_proj, ad::Expr h,
                                                       ad::Expr c, int hidden) {
  const ad::Expr gates = g.add(g.add(x_proj, g.matmul(w.wh, h)), w.b);
  const ad::Expr in = g.sigmoid(g.rows(gates, 0, hidden));
  const ad::Expr forget = g.sigmoid(g.rows(gates, hidden, hidden));
  const ad::Expr cand = g.tanh(g.rows(gates, 2 * hidden, hidden));
  const ad::Expr out = g.sigmoid(g.rows(gates, 3 * hidden, hidden));
  const ad::Expr c_next = g.add(g.cwise_mul(forget, c), g.cwise_mul(in, cand));
  const ad::Expr h_next = g.cwise_mul(out, g.tanh(c_next));
  return {h_next, c_next};
}

template <typename T>
ad::Expr PasteModel<T>::bilstm(Graph& g, const std::string& prefix, ad::Expr inputs, int hidden) {
  const auto n = g.value(inputs).cols();
  std::vector<ad::Expr> fw(n), bw(n);
  for (const auto& [dir, out] : {std::pair{std::string(".fw"), &fw}, std::pair{std::string(".bw"), &bw}}) {
    const LstmExprs w = lstm_params(g, prefix + dir);
    const ad::Expr proj = g.matmul(w.wx, inputs);
    ad::Expr h = g.zeros(hidden, 1);
    ad::Expr c = g.zeros(hidden, 1);
    const bool reverse = dir == ".bw";
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index j = reverse ? n - 1 - k : k;
      std::tie(h, c) = lstm_cell(g, w, g.col(proj, j), h, c, hidden);
      (*out)[j] = h;
    }
  }
  std::vector<ad::Expr> cols(n);
  for (Eigen::Index j = 0; j < n; ++j) cols[j] = g.vcat({fw[j], bw[j]});
  return g.hcat(cols);
}

template <typename T>
ad::Expr PasteModel<T>::encode_sentence(Graph& g, const EncodedSentence& s, std::mt19937_64* dropout_rng) {
  const int n = s.size();
  if (n == 0) throw Error("encode_sentence: empty sentence");
  if (static_cast<int>(s.pos.size()) != n || static_cast<int>(s.dep.size()) != n) {
    throw Error("encode_sentence: sentence is not annotated");
  }
  std::vector<ad::Expr> cols;
  cols.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::vector<ad::Expr> parts{g.lookup(params_.at("embed.word"), s.words[i])};
    if (config_.d_pos > 0) parts.push_back(g.lookup(params_.at("embed.pos"), s.pos[i]));
    if (config_.d_dep > 0) parts.push_back(g.lookup(params_.at("embed.dep"), s.dep[i]));
    cols.push_back(g.vcat(parts));
  }
  ad::Expr x = g.hcat(cols);
  if (dropout_rng != nullptr && config_.dropout > 0.0) {
    std::bernoulli_distribution keep(1.0 - config_.dropout);
    const T scale = static_cast<T>(1.0 / (1.0 - config_.dropout));
    Mat mask(g.value(x).rows(), g.value(x).cols());
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = keep(*dropout_rng) ? scale : T(0);
    }
    x = g.cwise_mul(x, g.constant(std::move(mask)));
  }
  return bilstm(g, "encoder", x, config_.d_h / 2);
}

template <typename T>
AttentionExprs PasteModel<T>::attention_step(Graph& g, ad::Expr encoded, ad::Expr prev_hidden, ad::Expr tuple_prev) {
  const auto n = g.value(encoded).cols();
  if (n == 0) throw Error("attention_step: empty sentence");
  if (g.value(encoded).rows() != config_.d_h || g.value(prev_hidden).rows() != config_.d_h ||
      g.value(tuple_prev).rows() != 4 * config_.d_p) {
    throw Error("attention_step: dimension mismatch");
  }
  const ad::Expr u = g.matmul(p(g, "attn.W_u"), encoded);
  const ad::Expr tup_proj = g.add(g.matmul(p(g, "attn.W_tup"), tuple_prev), p(g, "attn.b_tup"));
  const ad::Expr q_tup = g.add(g.matmul(p(g, "attn.W_qt"), tup_proj), p(g, "attn.b_qt"));
  const ad::Expr score_tup = g.matmul(p(g, "attn.v_qt"), g.tanh(g.add(u, q_tup)));
  const ad::Expr q_hid = g.add(g.matmul(p(g, "attn.W_q"), prev_hidden), p(g, "attn.b_q"));
  const ad::Expr score_hid = g.matmul(p(g, "attn.v_q"), g.tanh(g.add(u, q_hid)));
  const ad::Expr alpha_tup = g.softmax(score_tup);
  const ad::Expr alpha_hid = g.softmax(score_hid);
  const ad::Expr weights = g.scale(g.add(alpha_tup, alpha_hid), T(0.5));
  return {g.matmul(encoded, g.transpose(weights)), alpha_tup, alpha_hid};
}

template <typename T>
std::pair<ad::Expr, ad::Expr> PasteModel<T>::decoder_step(Graph& g, ad::Expr context, ad::Expr tuple_prev,
                                                          ad::Expr prev_hidden, ad::Expr prev_cell) {
  if (g.value(context).rows() != config_.d_h || g.value(context).cols() != 1 ||
      g.value(tuple_prev).rows() != 4 * config_.d_p || g.value(tuple_prev).cols() != 1 ||
      g.value(prev_hidden).rows() != config_.d_h || g.value(prev_cell).rows() != config_.d_h) {
    throw Error("decoder_step: dimension mismatch");
  }
  const LstmExprs w = lstm_params(g, "decoder");
  const ad::Expr x_proj = g.matmul(w.wx, g.vcat({context, tuple_prev}));
  return lstm_cell(g, w, x_proj, prev_hidden, prev_cell, config_.d_h);
}

template <typename T>
PointerExprs PasteModel<T>::pointer_network(Graph& g, const std::string& prefix, ad::Expr inputs) {
  PointerExprs out;
  out.states = bilstm(g, prefix, inputs, config_.d_p / 2);
  out.start = g.softmax(g.add(g.matmul(p(g, prefix + ".W_s"), out.states), p(g, prefix + ".b_s")));
  out.end = g.softmax(g.add(g.matmul(p(g, prefix + ".W_e"), out.states), p(g, prefix + ".b_e")));
  out.span_vec = g.vcat({g.matmul(out.states, g.transpose(out.start)), g.matmul(out.states, g.transpose(out.end))});
  return out;
}

template <typename T>
std::pair<PointerExprs, PointerExprs> PasteModel<T>::pointer_pass(Graph& g, ad::Expr encoded, ad::Expr hidden) {
  const auto n = g.value(encoded).cols();
  if (g.value(encoded).rows() != config_.d_h || g.value(hidden).rows() != config_.d_h) {
    throw Error("pointer_pass: dimension mismatch");
  }
  const ad::Expr hid = g.repeat_cols(hidden, n);
  PointerExprs first = pointer_network(g, first_pointer(config_.direction), g.vcat({encoded, hid}));
  PointerExprs second =
      pointer_network(g, second_pointer(config_.direction), g.vcat({encoded, first.states, hid}));
  return {first, second};
}

template <typename T>
ad::Expr PasteModel<T>::classify_sentiment(Graph& g, ad::Expr tuple_vec, ad::Expr hidden) {
  const ad::Expr logits = g.add(g.matmul(p(g, "sentiment.W"), g.vcat({tuple_vec, hidden})), p(g, "sentiment.b"));
  return g.softmax(logits);
}

template <typename T>
std::vector<StepExprs> PasteModel<T>::forward(Graph& g, const EncodedSentence& s, int steps,
                                              std::mt19937_64* dropout_rng) {
  if (steps < 1) throw Error("forward: steps must be >= 1");
  const ad::Expr encoded = encode_sentence(g, s, dropout_rng);
  ad::Expr hidden = g.zeros(config_.d_h, 1);
  ad::Expr cell = g.zeros(config_.d_h, 1);
  ad::Expr tuple_prev = g.zeros(4 * config_.d_p, 1);

  std::vector<StepExprs> out;
  out.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    const AttentionExprs att = attention_step(g, encoded, hidden, tuple_prev);
    std::tie(hidden, cell) = decoder_step(g, att.context, tuple_prev, hidden, cell);
    const auto [first, second] = pointer_pass(g, encoded, hidden);
    const bool af = config_.direction == Direction::AspectFirst;
    const PointerExprs& aspect = af ? first : second;
    const PointerExprs& opinion = af ? second : first;

    StepExprs st;
    st.aspect_start = aspect.start;
    st.aspect_end = aspect.end;
    st.opinion_start = opinion.start;
    st.opinion_end = opinion.end;
    st.aspect_vec = aspect.span_vec;
    st.opinion_vec = opinion.span_vec;
    st.tuple_vec = g.vcat({aspect.span_vec, opinion.span_vec});
    st.sentiment = classify_sentiment(g, st.tuple_vec, hidden);
    st.hidden = hidden;
    st.cell = cell;
    st.tuple_prev = tuple_prev;
    out.push_back(st);

    tuple_prev = g.add(tuple_prev, st.tuple_vec);
  }
  return out;
}

template <typename T>
std::vector<DecoderStepOutput<T>> PasteModel<T>::run(const EncodedSentence& s, int steps) {
  Graph g;
  const auto exprs = forward(g, s, steps);
  std::vector<DecoderStepOutput<T>> out;
  out.reserve(exprs.size());
  for (const auto& e : exprs) out.push_back(step_values(g, e, config_.direction));
  return out;
}

template <typename T>
DecoderStepOutput<T> step_values(const ad::Graph<T>& g, const StepExprs& e, Direction direction) {
  auto vec = [&](ad::Expr x) -> ad::Vector<T> {
    const auto& m = g.value(x);
    return Eigen::Map<const ad::Vector<T>>(m.data(), m.size());
  };
  DecoderStepOutput<T> o;
  o.aspect_start = vec(e.aspect_start);
  o.aspect_end = vec(e.aspect_end);
  o.opinion_start = vec(e.opinion_start);
  o.opinion_end = vec(e.opinion_end);
  o.aspect_vec = vec(e.aspect_vec);
  o.opinion_vec = vec(e.opinion_vec);
  o.tuple_vec = vec(e.tuple_vec);
  o.sentiment = vec(e.sentiment);
  o.hidden = vec(e.hidden);
  o.tuple_prev = vec(e.tuple_prev);
  o.direction = direction;
  return o;
}

template class PasteModel<float>;
template class PasteModel<double>;
template DecoderStepOutput<float> step_values(const ad::Graph<float>&, const StepExprs&, Direction);
template DecoderStepOutput<double> step_values(const ad::Graph<double>&, const StepExprs&, Direction);

}  // namespace paste
