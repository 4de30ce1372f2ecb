#include "aif/training.hpp"

#include <algorithm>
#include <cmath>

#include "aif/errors.hpp"
#include "aif/rng.hpp"
#include "encoder_internal.hpp"

namespace aif {
namespace {

struct AdamState {
  Gradients m;
  Gradients v;
  long step = 0;
};

void adam_update(EncoderParameters& params, Gradients& grads, AdamState& state,
                 const OptimizerSettings& opt) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));

  auto p = tensor_refs(params);
  auto g = tensor_refs(grads);
  auto m = tensor_refs(state.m);
  auto v = tensor_refs(state.v);
  for (std::size_t t = 0; t < p.size(); ++t) {
    for (std::ptrdiff_t i = 0; i < p[t].size; ++i) {
      const double grad = g[t].data[i];
      double& mi = m[t].data[i];
      double& vi = v[t].data[i];
      mi = opt.beta1 * mi + (1.0 - opt.beta1) * grad;
      vi = opt.beta2 * vi + (1.0 - opt.beta2) * grad * grad;
      p[t].data[i] -= opt.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + opt.eps);
    }
  }
}

}  // namespace

PretrainResult train(const std::vector<std::string>& corpus, const Lexicon& lexicon,
                     const Vocabulary& vocab, const EncoderConfig& config,
                     const TrainSettings& settings) {
  config.validate();
  if (settings.steps < 1) throw SchemaError("steps must be >= 1");
  if (settings.batch_size < 1) throw SchemaError("batch_size must be >= 1");

  const RelativePositionTable table =
      build_rpe_table(config.max_seq_len, config.effective_rpe_dim());
  PretrainResult result;
  result.params = init_parameters(config);
  AdamState state{zero_gradients(config), zero_gradients(config), 0};

  const std::uint64_t seed = static_cast<std::uint64_t>(config.rng_seed);
  for (int step = 1; step <= settings.steps; ++step) {
    const auto batch =
        make_pretrain_batch(corpus, lexicon, vocab, settings.batch_size,
                            settings.mask_rate, config.max_seq_len,
                            mix_seed(seed, 0x100000ULL + static_cast<std::uint64_t>(step)));
    Gradients grads = zero_gradients(config);
    const LossBreakdown loss =
        pretrain_loss(batch, result.params, config, table, &grads);
    if (!std::isfinite(loss.total)) {
      throw NumericError("non-finite loss at step " + std::to_string(step));
    }
    adam_update(result.params, grads, state, settings.optimizer);
    result.log.push_back({step, loss.mlm, loss.nsp, loss.span, loss.total});
  }
  return result;
}

namespace {

struct EncodedExample {
  TokenSequence seq;
  int tag = 0;
};

double accuracy(const std::vector<EncodedExample>& examples,
                const std::vector<std::size_t>& indices,
                const EncoderParameters& params, const EncoderConfig& config,
                const RelativePositionTable& table) {
  if (indices.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t idx : indices) {
    const auto& ex = examples[idx];
    const ForwardResult fwd = encoder_forward(ex.seq.tokens, ex.seq.segment_ids,
                                              params, config, &table);
    const Eigen::RowVectorXd logits = fwd.cls.transpose() * params.cls_head;
    const int predicted = logits(1) > logits(0) ? 1 : 0;
    if (predicted == ex.tag) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

}  // namespace

FineTuneResult fine_tune(const std::vector<FineTuneExample>& examples,
                         const EncoderParameters& params, const EncoderConfig& config,
                         const Lexicon& lexicon, const Vocabulary& vocab,
                         const RelativePositionTable& table,
                         const FineTuneSettings& settings, std::uint64_t rng_seed) {
  config.validate();
  if (settings.batch_size < 1) throw SchemaError("batch_size must be >= 1");
  if (settings.epochs < 0) throw SchemaError("epochs must be >= 0");

  FineTuneResult result;
  result.params = params;
  if (settings.epochs == 0) return result;

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < examples.size(); ++i) {
    by_class[examples[i].tag == 1 ? 1 : 0].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) {
    throw SchemaError("fine-tuning needs both labels present");
  }

  // 1:1 balance by downsampling the majority class, seeded.
  const std::size_t per_class = std::min(by_class[0].size(), by_class[1].size());
  Rng balance_rng(mix_seed(rng_seed, 0xBA1A));
  for (auto& cls : by_class) {
    if (cls.size() > per_class) {
      balance_rng.shuffle(cls);
      cls.resize(per_class);
      std::sort(cls.begin(), cls.end());
    }
  }

  // Per-class split keeps validation balanced too.
  std::vector<std::size_t> train_idx, val_idx;
  Rng split_rng(mix_seed(rng_seed, 0x5B17));
  for (auto& cls : by_class) {
    split_rng.shuffle(cls);
    std::size_t val_n = static_cast<std::size_t>(
        std::llround(settings.validation_fraction * static_cast<double>(cls.size())));
    val_n = std::min(val_n, cls.size() - 1);  // keep at least one training row
    if (cls.size() >= 2 && val_n == 0) val_n = 1;
    val_idx.insert(val_idx.end(), cls.end() - val_n, cls.end());
    train_idx.insert(train_idx.end(), cls.begin(), cls.end() - val_n);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  std::vector<EncodedExample> encoded(examples.size());
  auto encode_at = [&](std::size_t i) {
    if (!encoded[i].seq.tokens.empty()) return;
    const auto& ex = examples[i];
    encoded[i].seq = encode_pair(segment(ex.word, lexicon), segment(ex.text, lexicon),
                                 vocab, config.max_seq_len);
    encoded[i].tag = ex.tag;
  };
  for (std::size_t i : train_idx) encode_at(i);
  for (std::size_t i : val_idx) encode_at(i);

  EncoderParameters current = params;
  AdamState state{zero_gradients(config), zero_gradients(config), 0};
  double best_val = -1.0;

  Rng epoch_rng(mix_seed(rng_seed, 0xE90C));
  for (int epoch = 1; epoch <= settings.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    epoch_rng.shuffle(order);

    for (std::size_t start = 0; start < order.size(); start += settings.batch_size) {
      const std::size_t stop = std::min(order.size(),
                                        start + static_cast<std::size_t>(settings.batch_size));
      Gradients grads = zero_gradients(config);
      const double batch_n = static_cast<double>(stop - start);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = encoded[order[b]];
        const ForwardResult fwd = encoder_forward(ex.seq.tokens, ex.seq.segment_ids,
                                                  current, config, &table);
        const Eigen::RowVectorXd logits = fwd.cls.transpose() * current.cls_head;
        Eigen::RowVectorXd dlogits;
        batch_loss += detail::cross_entropy(logits, ex.tag, &dlogits);
        dlogits /= batch_n;
        grads.cls_head += fwd.cls * dlogits;
        Eigen::MatrixXd dHidden =
            Eigen::MatrixXd::Zero(ex.seq.length(), config.d_model);
        dHidden.row(0) = dlogits * current.cls_head.transpose();
        encoder_backward(fwd.trace, ex.seq.tokens, ex.seq.segment_ids, current,
                         config, &table, dHidden, grads);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite fine-tuning loss in epoch " +
                           std::to_string(epoch));
      }
      adam_update(current, grads, state, settings.optimizer);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_accuracy = accuracy(encoded, train_idx, current, config, table);
    stats.val_accuracy = accuracy(encoded, val_idx, current, config, table);
    result.epochs.push_back(stats);
    if (stats.val_accuracy > best_val) {
      best_val = stats.val_accuracy;
      result.params = current;
      result.best_epoch = epoch;
    }
  }
  return result;
}

Eigen::VectorXd embed_word(const std::string& word, const EncoderParameters& params,
                           const EncoderConfig& config, const Lexicon& lexicon,
                           const Vocabulary& vocab, const RelativePositionTable& table) {
  if (word.empty()) throw SchemaError("cannot embed an empty word");
  const TokenSequence seq = encode_single(segment(word, lexicon), vocab, config.max_seq_len);
  if (seq.length() <= 2) {
    // Only [CLS] and [SEP] survived, so the word was pure whitespace.
    throw SchemaError("word has no encodable characters: '" + word + "'");
  }
  return encoder_forward(seq.tokens, seq.segment_ids, params, config, &table).cls;
}

}  // namespace aif
