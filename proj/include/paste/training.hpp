#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "paste/corpus.hpp"
#include "paste/evaluation.hpp"
#include "paste/model.hpp"

namespace paste {

/// One decoding target. Spans are {-1, -1} on NONE steps.
struct TargetStep {
  static constexpr int kSentinel = -1;

  Span aspect{kSentinel, kSentinel};
  Span opinion{kSentinel, kSentinel};
  Sentiment sentiment = Sentiment::NONE;
  /// False exactly on NONE steps: only the sentiment term is scored there.
  bool pointer_loss_mask = false;
};

/// Sorted gold triplets, one NONE terminator, then NONE padding up to J.
/// Throws Error for an empty gold list or J < |gold| + 1.
std::vector<TargetStep> build_target_sequence(std::span<const OpinionTriplet> gold, Direction dir, int J);

/// Same layout but keeps the given triplet order.
std::vector<TargetStep> build_target_sequence_unsorted(std::span<const OpinionTriplet> gold, int J);

inline constexpr double kProbabilityFloor = 1e-12;

/// Sum of negative log-likelihood terms of one sentence: four pointer terms
/// and one sentiment term per real step, the sentiment term alone on the
/// first NONE step, nothing afterwards. Requires a step output for every
/// target up to and including the first NONE.
template <typename T>
ad::Expr sentence_nll(ad::Graph<T>& g, const std::vector<StepExprs>& steps, const std::vector<TargetStep>& targets);

/// Batch objective on plain values:
/// -1/(M*J) * sum over sentences and steps of the log-likelihood terms.
/// Throws Error on mismatched lengths.
template <typename T>
T compute_loss(const std::vector<std::vector<DecoderStepOutput<T>>>& outputs,
               const std::vector<std::vector<TargetStep>>& targets);

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  int epochs = 100;
  int batch_size = 10;
  std::uint64_t seed = 13;
  int runs = 5;
  /// Ablation: shuffle each sentence's targets every epoch instead of
  /// sorting them in generation order.
  bool random_target_order = false;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Adam with L2 weight decay folded into the gradient.
template <typename T>
class Adam {
 public:
  Adam(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParamStore<T>& params);
  long steps() const { return t_; }

 private:
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
  std::map<std::string, std::pair<ad::Matrix<T>, ad::Matrix<T>>> moments_;
};

struct TrainingExample {
  EncodedSentence ids;
  std::vector<OpinionTriplet> gold;
};

/// Forward + loss over a batch; J is the longest target sequence in the
/// batch. With `accumulate_grad` the batch loss is backpropagated into the
/// parameter gradients (which are not zeroed here). `order_rng` switches to
/// random target order.
template <typename T>
T batch_loss(PasteModel<T>& model, std::span<const TrainingExample> batch, bool accumulate_grad,
             std::mt19937_64* dropout_rng = nullptr, std::mt19937_64* order_rng = nullptr);

/// (max gold triplets per sentence) + 2.
int default_max_steps(const std::vector<AnnotatedSentence>& train);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  Prf dev;

  nlohmann::json to_json() const;
};

struct TrainResult {
  PasteModel<float> model;
  Vocabulary vocab;
  int best_epoch = 0;
  Prf best_dev;
  std::vector<EpochLog> log;
};

struct TrainHooks {
  /// Receives one JSON line per epoch.
  std::ostream* log = nullptr;
  /// Written whenever dev F1 improves.
  std::optional<std::filesystem::path> checkpoint;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Builds the vocabulary from `train`, initializes the model from
/// config.seed, and runs mini-batch Adam with best-dev-F1 model selection.
/// Throws Error with diagnostics if the loss becomes non-finite.
TrainResult train(const std::vector<AnnotatedSentence>& train_set, const std::vector<AnnotatedSentence>& dev_set,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  const EmbeddingTable* embeddings = nullptr, const TrainHooks& hooks = {});

/// Word table initialization: pre-trained vectors where available, uniform
/// [-0.1, 0.1] otherwise. Throws Error when the table dimension differs from d_w.
ad::Matrix<float> initial_word_embeddings(const Vocabulary& vocab, const EmbeddingTable* embeddings, int d_w,
                                          std::mt19937_64& rng);

/// Decodes every sentence with the model.
TripletSets predict_all(PasteModel<float>& model, const Vocabulary& vocab,
                        const std::vector<AnnotatedSentence>& sentences);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::map<std::string, double> per_tensor;
  bool all_finite = true;
};

/// Denominator floor for gradient_check. Finite differences of a double loss
/// with step 1e-5 carry ~1e-11 of rounding noise, so tensors whose true
/// gradient is zero (e.g. softmax-invariant biases) are judged absolutely.
inline constexpr double kGradCheckNoiseFloor = 1e-6;

/// Compares backprop gradients of batch_loss with central differences for
/// every element of every parameter tensor. Per-tensor error is
/// |g_a - g_n|_2 / max(|g_a|_2 + |g_n|_2, kGradCheckNoiseFloor).
GradCheckResult gradient_check(PasteModel<double>& model, std::span<const TrainingExample> batch, double step = 1e-5);

}  // namespace paste
