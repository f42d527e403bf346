#include "paste/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "paste/checkpoint.hpp"
#include "paste/inference.hpp"

namespace paste {

using nlohmann::json;

std::vector<TargetStep> build_target_sequence_unsorted(std::span<const OpinionTriplet> gold, int J) {
  if (gold.empty()) throw Error("build_target_sequence: sentence has no gold triplets");
  if (J < static_cast<int>(gold.size()) + 1) {
    throw Error("build_target_sequence: J=" + std::to_string(J) + " leaves no room for " +
                std::to_string(gold.size()) + " triplets plus the NONE terminator");
  }
  std::vector<TargetStep> out;
  out.reserve(J);
  for (const auto& t : gold) out.push_back({t.aspect, t.opinion, t.sentiment, true});
  out.resize(J);
  return out;
}

std::vector<TargetStep> build_target_sequence(std::span<const OpinionTriplet> gold, Direction dir, int J) {
  const auto sorted = sort_targets(gold, dir);
  return build_target_sequence_unsorted(sorted, J);
}

template <typename T>
ad::Expr sentence_nll(ad::Graph<T>& g, const std::vector<StepExprs>& steps, const std::vector<TargetStep>& targets) {
  const T floor = static_cast<T>(kProbabilityFloor);
  std::vector<ad::Expr> terms;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    if (j >= steps.size()) throw Error("sentence_nll: fewer step outputs than scored targets");
    const TargetStep& t = targets[j];
    const StepExprs& s = steps[j];
    if (t.pointer_loss_mask) {
      terms.push_back(g.neg_log(s.aspect_start, t.aspect.start, floor));
      terms.push_back(g.neg_log(s.aspect_end, t.aspect.end, floor));
      terms.push_back(g.neg_log(s.opinion_start, t.opinion.start, floor));
      terms.push_back(g.neg_log(s.opinion_end, t.opinion.end, floor));
    }
    terms.push_back(g.neg_log(s.sentiment, static_cast<int>(t.sentiment), floor));
    if (t.sentiment == Sentiment::NONE) break;
  }
  return g.sum(terms);
}

template <typename T>
T compute_loss(const std::vector<std::vector<DecoderStepOutput<T>>>& outputs,
               const std::vector<std::vector<TargetStep>>& targets) {
  if (outputs.size() != targets.size()) throw Error("compute_loss: batch sizes differ");
  if (outputs.empty()) throw Error("compute_loss: empty batch");
  const std::size_t J = targets.front().size();
  ad::Graph<T> g;
  std::vector<ad::Expr> per_sentence;
  for (std::size_t m = 0; m < outputs.size(); ++m) {
    if (outputs[m].size() != targets[m].size() || targets[m].size() != J) {
      throw Error("compute_loss: step outputs and targets must all have length J");
    }
    std::vector<StepExprs> steps;
    for (const auto& o : outputs[m]) {
      auto row = [&](const ad::Vector<T>& v) { return g.constant(v.transpose()); };
      StepExprs s;
      s.aspect_start = row(o.aspect_start);
      s.aspect_end = row(o.aspect_end);
      s.opinion_start = row(o.opinion_start);
      s.opinion_end = row(o.opinion_end);
      s.sentiment = g.constant(o.sentiment);
      steps.push_back(s);
    }
    per_sentence.push_back(sentence_nll(g, steps, targets[m]));
  }
  return g.scalar(g.sum(per_sentence)) / static_cast<T>(outputs.size() * J);
}

template ad::Expr sentence_nll(ad::Graph<float>&, const std::vector<StepExprs>&, const std::vector<TargetStep>&);
template ad::Expr sentence_nll(ad::Graph<double>&, const std::vector<StepExprs>&, const std::vector<TargetStep>&);
template float compute_loss(const std::vector<std::vector<DecoderStepOutput<float>>>&,
                            const std::vector<std::vector<TargetStep>>&);
template double compute_loss(const std::vector<std::vector<DecoderStepOutput<double>>>&,
                             const std::vector<std::vector<TargetStep>>&);

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error("invalid training config: " + m); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be positive");
  if (!(weight_decay >= 0.0)) fail("weight decay must be non-negative");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch size must be >= 1");
  if (runs < 1) fail("runs must be >= 1");
}

json TrainConfig::to_json() const {
  return {{"lr", learning_rate}, {"weight_decay", weight_decay}, {"epochs", epochs},
          {"batch_size", batch_size}, {"seed", seed}, {"runs", runs},
          {"random_target_order", random_target_order}};
}

template <typename T>
Adam<T>::Adam(double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {}

template <typename T>
void Adam<T>::step(ParamStore<T>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  const T step_size = static_cast<T>(lr_ / c1);
  const T b1 = static_cast<T>(b1_), b2 = static_cast<T>(b2_);
  for (const auto& name : params.names()) {
    auto& p = params.at(name);
    if (p.grad.size() == 0) continue;
    auto& [m, v] = moments_[name];
    if (m.size() == 0) {
      m = ad::Matrix<T>::Zero(p.value.rows(), p.value.cols());
      v = m;
    }
    ad::Matrix<T> grad = p.grad;
    if (wd_ > 0.0) grad += static_cast<T>(wd_) * p.value;
    m = b1 * m + (T(1) - b1) * grad;
    v = b2 * v + (T(1) - b2) * grad.cwiseProduct(grad);
    const auto denom = (v.array() / static_cast<T>(c2)).sqrt() + static_cast<T>(eps_);
    p.value.array() -= step_size * m.array() / denom;
  }
}

template class Adam<float>;
template class Adam<double>;

// ---------------------------------------------------------------------------

template <typename T>
T batch_loss(PasteModel<T>& model, std::span<const TrainingExample> batch, bool accumulate_grad,
             std::mt19937_64* dropout_rng, std::mt19937_64* order_rng) {
  if (batch.empty()) throw Error("batch_loss: empty batch");
  std::size_t longest = 0;
  for (const auto& ex : batch) longest = std::max(longest, ex.gold.size());
  const int J = static_cast<int>(longest) + 1;
  const T norm = static_cast<T>(1.0 / (static_cast<double>(batch.size()) * J));

  T total = 0;
  for (const auto& ex : batch) {
    std::vector<TargetStep> targets;
    if (order_rng != nullptr) {
      auto shuffled = ex.gold;
      std::shuffle(shuffled.begin(), shuffled.end(), *order_rng);
      targets = build_target_sequence_unsorted(shuffled, J);
    } else {
      targets = build_target_sequence(ex.gold, model.config().direction, J);
    }
    // Steps after the NONE terminator contribute nothing and do not affect
    // earlier steps, so decoding stops there.
    const int steps = static_cast<int>(ex.gold.size()) + 1;
    ad::Graph<T> g;
    const auto outs = model.forward(g, ex.ids, steps, dropout_rng);
    const ad::Expr nll = g.scale(sentence_nll(g, outs, targets), norm);
    total += g.scalar(nll);
    if (accumulate_grad) g.backward(nll);
  }
  return total;
}

template float batch_loss(PasteModel<float>&, std::span<const TrainingExample>, bool, std::mt19937_64*,
                          std::mt19937_64*);
template double batch_loss(PasteModel<double>&, std::span<const TrainingExample>, bool, std::mt19937_64*,
                           std::mt19937_64*);

int default_max_steps(const std::vector<AnnotatedSentence>& train) {
  std::size_t most = 0;
  for (const auto& s : train) most = std::max(most, s.gold.size());
  return static_cast<int>(most) + 2;
}

json EpochLog::to_json() const {
  return {{"epoch", epoch}, {"train_loss", train_loss}, {"dev_p", dev.precision()}, {"dev_r", dev.recall()},
          {"dev_f1", dev.f1()}};
}

ad::Matrix<float> initial_word_embeddings(const Vocabulary& vocab, const EmbeddingTable* embeddings, int d_w,
                                          std::mt19937_64& rng) {
  if (embeddings != nullptr && embeddings->dim != d_w) {
    throw Error("embedding table has dimension " + std::to_string(embeddings->dim) + " but d_w is " +
                std::to_string(d_w));
  }
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  ad::Matrix<float> table(vocab.words.size(), d_w);
  for (int i = 0; i < vocab.words.size(); ++i) {
    const std::vector<float>* vec = embeddings ? embeddings->find(vocab.words.keys()[i]) : nullptr;
    for (int k = 0; k < d_w; ++k) {
      const double r = dist(rng);
      table(i, k) = vec ? (*vec)[k] : static_cast<float>(r);
    }
  }
  return table;
}

TripletSets predict_all(PasteModel<float>& model, const Vocabulary& vocab,
                        const std::vector<AnnotatedSentence>& sentences) {
  TripletSets out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(decode_triplets(model, encode_ids(s, vocab, model.config())));
  return out;
}

namespace {

std::string parameter_norms(const ParamStore<float>& params) {
  std::ostringstream o;
  for (const auto& name : params.names()) {
    o << "  " << name << ": |w|=" << params.at(name).value.norm() << " |g|=" << params.at(name).grad.norm() << '\n';
  }
  return o.str();
}

}  // namespace

TrainResult train(const std::vector<AnnotatedSentence>& train_set, const std::vector<AnnotatedSentence>& dev_set,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  const EmbeddingTable* embeddings, const TrainHooks& hooks) {
  model_config.validate();
  train_config.validate();
  Vocabulary vocab = build_vocab(train_set);

  std::mt19937_64 rng(train_config.seed);
  std::mt19937_64 order_rng(train_config.seed ^ 0x9e3779b97f4a7c15ULL);
  PasteModel<float> model(model_config, vocab.words.size(), vocab.pos.size(), vocab.dep.size());
  model.init_random(rng());
  model.set_word_embeddings(initial_word_embeddings(vocab, embeddings, model_config.d_w, rng));

  std::vector<TrainingExample> examples;
  examples.reserve(train_set.size());
  for (const auto& s : train_set) examples.push_back({encode_ids(s, vocab, model_config), s.gold});

  std::vector<TripletSets::value_type> dev_gold;
  for (const auto& s : dev_set) dev_gold.push_back(s.gold);

  Adam<float> optimizer(train_config.learning_rate, train_config.weight_decay);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{model, vocab, 0, {}, {}};
  bool have_best = false;
  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += train_config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + train_config.batch_size);
      std::vector<TrainingExample> batch;
      for (std::size_t k = begin; k < end; ++k) batch.push_back(examples[order[k]]);

      model.params().zero_grad();
      const float loss = batch_loss(model, std::span<const TrainingExample>(batch), true, &rng,
                                    train_config.random_target_order ? &order_rng : nullptr);
      if (!std::isfinite(loss)) {
        throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches + 1) +
                    "\nparameter norms:\n" + parameter_norms(model.params()));
      }
      optimizer.step(model.params());
      loss_sum += loss;
      ++batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / std::max(1, batches);
    entry.dev = score_exact_match(predict_all(model, vocab, dev_set), dev_gold);
    result.log.push_back(entry);
    if (hooks.log != nullptr) *hooks.log << entry.to_json().dump() << std::endl;
    if (hooks.on_epoch) hooks.on_epoch(entry);

    if (!have_best || entry.dev.f1() > result.best_dev.f1()) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_dev = entry.dev;
      result.model = model;
      if (hooks.checkpoint) {
        save_checkpoint(*hooks.checkpoint, model, vocab,
                        {{"train_config", train_config.to_json()}, {"epoch", epoch}, {"dev", entry.dev.to_json()}});
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

GradCheckResult gradient_check(PasteModel<double>& model, std::span<const TrainingExample> batch, double step) {
  auto& params = model.params();
  params.zero_grad();
  batch_loss(model, batch, true);

  GradCheckResult result;
  for (const auto& name : params.names()) {
    auto& p = params.at(name);
    const ad::Matrix<double> analytic = p.grad;
    ad::Matrix<double> numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double saved = p.value(k);
      p.value(k) = saved + step;
      const double plus = batch_loss(model, batch, false);
      p.value(k) = saved - step;
      const double minus = batch_loss(model, batch, false);
      p.value(k) = saved;
      numeric(k) = (plus - minus) / (2.0 * step);
    }
    result.all_finite = result.all_finite && analytic.allFinite() && numeric.allFinite();
    const double denom = analytic.norm() + numeric.norm();
    const double rel = denom > 0.0 ? (analytic - numeric).norm() / std::max(denom, kGradCheckNoiseFloor) : 0.0;
    result.per_tensor[name] = rel;
    if (rel >= result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_tensor = name;
    }
  }
  return result;
}

}  // namespace paste
