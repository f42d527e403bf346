#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "paste/autograd.hpp"
#include "paste/corpus.hpp"
#include "paste/triplet.hpp"

namespace paste {

struct ModelConfig {
  int d_w = 300;
  int d_pos = 50;
  int d_dep = 50;
  /// Decoder hidden size; each encoder direction gets d_h / 2.
  int d_h = 300;
  /// Pointer Bi-LSTM output size; each direction gets d_p / 2.
  int d_p = 300;
  double dropout = 0.5;
  Direction direction = Direction::AspectFirst;
  int max_steps = 10;

  /// Throws Error describing the first violated constraint.
  void validate() const;
  int input_dim() const { return d_w + d_pos + d_dep; }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named, ordered collection of learnable tensors.
template <typename T>
class ParamStore {
 public:
  using Mat = ad::Matrix<T>;

  ad::Parameter<T>& add(const std::string& name, Mat value);
  ad::Parameter<T>& at(const std::string& name);
  const ad::Parameter<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  template <typename U>
  ParamStore<U> cast() const;

 private:
  // std::map keeps references stable across inserts.
  std::map<std::string, ad::Parameter<T>> index_;
  std::vector<std::string> order_;
};

/// Token ids of one sentence after vocabulary lookup.
struct EncodedSentence {
  std::vector<int> words;
  std::vector<int> pos;
  std::vector<int> dep;

  int size() const { return static_cast<int>(words.size()); }
};

/// Throws Error if the configuration uses POS/DEP features and the sentence
/// is not annotated.
EncodedSentence encode_ids(const AnnotatedSentence& s, const Vocabulary& vocab, const ModelConfig& config);

/// Graph handles for one decoding step.
struct StepExprs {
  ad::Expr aspect_start, aspect_end, opinion_start, opinion_end;  // 1 x n each
  ad::Expr aspect_vec, opinion_vec;                               // 2 d_p
  ad::Expr tuple_vec;                                             // 4 d_p
  ad::Expr sentiment;                                             // 4 x 1
  ad::Expr hidden, cell;                                          // d_h
  ad::Expr tuple_prev;                                            // 4 d_p, input to this step
};

/// Values of one decoding step.
template <typename T>
struct DecoderStepOutput {
  ad::Vector<T> aspect_start, aspect_end, opinion_start, opinion_end;
  ad::Vector<T> aspect_vec, opinion_vec, tuple_vec;
  ad::Vector<T> sentiment;
  ad::Vector<T> hidden;
  /// tup_prev fed into this step.
  ad::Vector<T> tuple_prev;
  Direction direction = Direction::AspectFirst;

  /// Distributions of the pointer network that runs first (S_p1, E_p1).
  const ad::Vector<T>& first_start() const { return direction == Direction::AspectFirst ? aspect_start : opinion_start; }
  const ad::Vector<T>& first_end() const { return direction == Direction::AspectFirst ? aspect_end : opinion_end; }
  const ad::Vector<T>& second_start() const { return direction == Direction::AspectFirst ? opinion_start : aspect_start; }
  const ad::Vector<T>& second_end() const { return direction == Direction::AspectFirst ? opinion_end : aspect_end; }
};

/// Attention weights alongside the context vector, for inspection.
struct AttentionExprs {
  ad::Expr context;       // d_h x 1
  ad::Expr alpha_tuple;   // 1 x n, from tup_prev
  ad::Expr alpha_hidden;  // 1 x n, from h_{t-1}
};

struct PointerExprs {
  ad::Expr start, end;  // 1 x n
  ad::Expr states;      // d_p x n
  ad::Expr span_vec;    // 2 d_p
};

/// The pointer-network triplet extractor. Parameter names are keyed by
/// entity role ("aspect_ptr", "opinion_ptr"); the direction decides which of
/// the two runs first and therefore their input widths.
template <typename T>
class PasteModel {
 public:
  using Mat = ad::Matrix<T>;
  using Graph = ad::Graph<T>;

  PasteModel(ModelConfig config, int vocab_size, int pos_size, int dep_size);
  PasteModel(ModelConfig config, ParamStore<T> params);

  /// PyTorch-style uniform(-1/sqrt(fan), 1/sqrt(fan)) for dense layers and
  /// uniform(-0.1, 0.1) for embeddings.
  void init_random(std::uint64_t seed);
  void init_zero();
  void set_word_embeddings(const Mat& table);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Contextual encoder states, d_h x n. `dropout_rng` enables embedding
  /// dropout (training mode).
  ad::Expr encode_sentence(Graph& g, const EncodedSentence& s, std::mt19937_64* dropout_rng = nullptr);

  /// Combined additive attention over encoder states.
  AttentionExprs attention_step(Graph& g, ad::Expr encoded, ad::Expr prev_hidden, ad::Expr tuple_prev);

  /// One decoder LSTM update on input [context ; tuple_prev].
  std::pair<ad::Expr, ad::Expr> decoder_step(Graph& g, ad::Expr context, ad::Expr tuple_prev, ad::Expr prev_hidden,
                                             ad::Expr prev_cell);

  /// Runs both pointer networks; returns (first, second) in generation order.
  std::pair<PointerExprs, PointerExprs> pointer_pass(Graph& g, ad::Expr encoded, ad::Expr hidden);

  /// 4-way distribution over {POS, NEG, NEU, NONE}.
  ad::Expr classify_sentiment(Graph& g, ad::Expr tuple_vec, ad::Expr hidden);

  /// Encodes and decodes `steps` triplets, accumulating tup_prev.
  std::vector<StepExprs> forward(Graph& g, const EncodedSentence& s, int steps,
                                 std::mt19937_64* dropout_rng = nullptr);

  /// Evaluation-mode forward returning plain values.
  std::vector<DecoderStepOutput<T>> run(const EncodedSentence& s, int steps);

 private:
  struct LstmExprs {
    ad::Expr wx, wh, b;
  };

  void create_parameters(int vocab_size, int pos_size, int dep_size);
  void add_lstm(const std::string& prefix, int input, int hidden);
  void add_pointer(const std::string& prefix, int input);
  void add_param(const std::string& name, int rows, int cols, double init_bound);
  LstmExprs lstm_params(Graph& g, const std::string& prefix);
  std::pair<ad::Expr, ad::Expr> lstm_cell(Graph& g, const LstmExprs& p, ad::Expr x_proj, ad::Expr h, ad::Expr c,
                                          int hidden);
  /// Bidirectional LSTM over the columns of `inputs`; returns 2*hidden x n.
  ad::Expr bilstm(Graph& g, const std::string& prefix, ad::Expr inputs, int hidden);
  PointerExprs pointer_network(Graph& g, const std::string& prefix, ad::Expr inputs);
  ad::Expr p(Graph& g, const std::string& name) { return g.parameter(params_.at(name)); }

  ModelConfig config_;
  ParamStore<T> params_;
  std::map<std::string, double> init_bound_;
};

/// Reads a step's node values out of a graph.
template <typename T>
DecoderStepOutput<T> step_values(const ad::Graph<T>& g, const StepExprs& e, Direction direction);

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class PasteModel<float>;
extern template class PasteModel<double>;

}  // namespace paste
