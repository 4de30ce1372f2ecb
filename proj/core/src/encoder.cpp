#include "aif/encoder.hpp"

#include <cmath>

#include "aif/errors.hpp"
#include "aif/rng.hpp"
#include "encoder_internal.hpp"

namespace aif {

void EncoderConfig::validate() const {
  if (num_layers < 0) throw SchemaError("num_layers must be >= 0");
  if (num_heads < 1) throw SchemaError("num_heads must be >= 1");
  if (d_model < 1 || d_ff < 1) throw SchemaError("d_model and d_ff must be >= 1");
  if (d_model % num_heads != 0) {
    throw SchemaError("d_model must be divisible by num_heads");
  }
  if (vocab_size < 1) throw SchemaError("vocab_size must be >= 1");
  if (max_seq_len < 1) throw SchemaError("max_seq_len must be >= 1");
  const int d_z = effective_rpe_dim();
  if (d_z != d_k()) {
    // alpha is added directly to key and value rows, so the dimensions
    // cannot differ.
    throw SchemaError("rpe_dim must equal d_model / num_heads");
  }
  if (d_z % 2 != 0) throw SchemaError("rpe_dim must be even");
}

namespace {

Eigen::MatrixXd gaussian(Rng& rng, int rows, int cols, double sigma) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = sigma * rng.normal();
  }
  return m;
}

LayerParameters zero_layer(const EncoderConfig& c) {
  LayerParameters l;
  l.W_Q = Eigen::MatrixXd::Zero(c.d_model, c.d_model);
  l.W_K = Eigen::MatrixXd::Zero(c.d_model, c.d_model);
  l.W_V = Eigen::MatrixXd::Zero(c.d_model, c.d_model);
  l.W_O = Eigen::MatrixXd::Zero(c.d_model, c.d_model);
  l.ln1_gain = Eigen::VectorXd::Zero(c.d_model);
  l.ln1_bias = Eigen::VectorXd::Zero(c.d_model);
  l.W1 = Eigen::MatrixXd::Zero(c.d_model, c.d_ff);
  l.b1 = Eigen::VectorXd::Zero(c.d_ff);
  l.W2 = Eigen::MatrixXd::Zero(c.d_ff, c.d_model);
  l.b2 = Eigen::VectorXd::Zero(c.d_model);
  l.ln2_gain = Eigen::VectorXd::Zero(c.d_model);
  l.ln2_bias = Eigen::VectorXd::Zero(c.d_model);
  return l;
}

}  // namespace

EncoderParameters init_parameters(const EncoderConfig& config) {
  config.validate();
  constexpr double kSigma = 0.02;
  Rng rng(mix_seed(static_cast<std::uint64_t>(config.rng_seed), 0xA1F));
  EncoderParameters p;
  p.token_embed = gaussian(rng, config.vocab_size, config.d_model, kSigma);
  p.segment_embed = gaussian(rng, 2, config.d_model, kSigma);
  for (int l = 0; l < config.num_layers; ++l) {
    LayerParameters layer = zero_layer(config);
    layer.W_Q = gaussian(rng, config.d_model, config.d_model, kSigma);
    layer.W_K = gaussian(rng, config.d_model, config.d_model, kSigma);
    layer.W_V = gaussian(rng, config.d_model, config.d_model, kSigma);
    layer.W_O = gaussian(rng, config.d_model, config.d_model, kSigma);
    // A zero layernorm gain would collapse the residual stream at init.
    layer.ln1_gain.setOnes();
    layer.ln2_gain.setOnes();
    layer.W1 = gaussian(rng, config.d_model, config.d_ff, kSigma);
    layer.W2 = gaussian(rng, config.d_ff, config.d_model, kSigma);
    p.layers.push_back(std::move(layer));
  }
  p.mlm_head = gaussian(rng, config.d_model, config.vocab_size, kSigma);
  p.nsp_head = gaussian(rng, config.d_model, 2, kSigma);
  p.span_head = gaussian(rng, config.d_model, 2, kSigma);
  p.cls_head = gaussian(rng, config.d_model, 2, kSigma);
  return p;
}

RelativePositionTable build_rpe_table(int max_seq_len, int d_z) {
  if (max_seq_len < 1) throw SchemaError("max_seq_len must be >= 1");
  if (d_z < 2 || d_z % 2 != 0) throw SchemaError("d_z must be a positive even number");
  RelativePositionTable table;
  table.max_seq_len = max_seq_len;
  table.d_z = d_z;
  table.values.resize(2 * max_seq_len - 1, d_z);
  for (int r = 0; r < table.values.rows(); ++r) {
    const int delta = r - (max_seq_len - 1);
    for (int k = 0; 2 * k < d_z; ++k) {
      const double angle = delta / std::pow(10000.0, (2.0 * k) / d_z);
      table.values(r, 2 * k) = std::sin(angle);
      table.values(r, 2 * k + 1) = std::cos(angle);
    }
  }
  return table;
}

Eigen::RowVectorXd RelativePositionTable::row(int delta) const {
  if (delta <= -max_seq_len || delta >= max_seq_len) {
    throw SchemaError("relative distance " + std::to_string(delta) +
                      " outside [-(max_seq_len-1), max_seq_len-1]");
  }
  return values.row(delta + max_seq_len - 1);
}

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& X, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias, LayerNormTrace* trace) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  Eigen::MatrixXd normalized(n, d);
  Eigen::VectorXd inv_std(n);
  for (int i = 0; i < n; ++i) {
    const double mean = X.row(i).mean();
    const double var = (X.row(i).array() - mean).square().sum() / d;  // biased
    inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    normalized.row(i) = (X.row(i).array() - mean) * inv_std(i);
  }
  Eigen::MatrixXd out = normalized * gain.asDiagonal();
  out.rowwise() += bias.transpose();
  if (trace) {
    trace->input = X;
    trace->normalized = normalized;
    trace->inv_std = inv_std;
  }
  return out;
}

Eigen::MatrixXd embed_input(const std::vector<int>& tokens,
                            const std::vector<int>& segments,
                            const EncoderParameters& params,
                            const EncoderConfig& config) {
  if (tokens.empty()) throw SchemaError("cannot embed an empty sequence");
  if (tokens.size() != segments.size()) {
    throw SchemaError("tokens and segments differ in length");
  }
  if (static_cast<int>(tokens.size()) > config.max_seq_len) {
    throw SchemaError("sequence longer than max_seq_len");
  }
  Eigen::MatrixXd X(tokens.size(), config.d_model);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || tokens[t] >= config.vocab_size) {
      throw SchemaError("token id " + std::to_string(tokens[t]) + " out of range");
    }
    if (segments[t] != 0 && segments[t] != 1) {
      throw SchemaError("segment ids must be 0 or 1");
    }
    X.row(t) = params.token_embed.row(tokens[t]) + params.segment_embed.row(segments[t]);
  }
  return X;
}

namespace detail {

Eigen::MatrixXd relative_window(const RelativePositionTable* table, int n, int d_k) {
  Eigen::MatrixXd Arel = Eigen::MatrixXd::Zero(2 * n - 1, d_k);
  if (table) {
    for (int r = 0; r < 2 * n - 1; ++r) Arel.row(r) = table->row(r - (n - 1));
  }
  return Arel;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd probs(scores.rows(), scores.cols());
  for (int i = 0; i < scores.rows(); ++i) {
    const Eigen::ArrayXd shifted =
        scores.row(i).array() - scores.row(i).maxCoeff();
    const Eigen::ArrayXd e = shifted.exp();
    probs.row(i) = (e / e.sum()).matrix().transpose();
  }
  return probs;
}

double cross_entropy(const Eigen::RowVectorXd& logits, int label,
                     Eigen::RowVectorXd* dlogits) {
  const double max = logits.maxCoeff();
  const Eigen::ArrayXd e = (logits.array() - max).exp();
  const double sum = e.sum();
  const double loss = std::log(sum) - (logits(label) - max);
  if (dlogits) {
    *dlogits = (e / sum).matrix().transpose();
    (*dlogits)(label) -= 1.0;
  }
  return loss;
}

}  // namespace detail

Eigen::MatrixXd attention_layer(const Eigen::MatrixXd& X, const LayerParameters& layer,
                                const EncoderConfig& config,
                                const RelativePositionTable* table, LayerTrace* trace) {
  const int n = static_cast<int>(X.rows());
  if (n < 1) throw SchemaError("attention needs at least one position");
  if (X.cols() != config.d_model) throw SchemaError("activation width != d_model");
  const int dk = config.d_k();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  const Eigen::MatrixXd Q = X * layer.W_Q;
  const Eigen::MatrixXd K = X * layer.W_K;
  const Eigen::MatrixXd V = X * layer.W_V;
  const Eigen::MatrixXd Arel = detail::relative_window(table, n, dk);

  Eigen::MatrixXd concat(n, config.d_model);
  std::vector<Eigen::MatrixXd> probs_per_head;
  for (int h = 0; h < config.num_heads; ++h) {
    const auto Qh = Q.middleCols(h * dk, dk);
    const auto Kh = K.middleCols(h * dk, dk);
    const auto Vh = V.middleCols(h * dk, dk);

    Eigen::MatrixXd scores = Qh * Kh.transpose();
    for (int i = 0; i < n; ++i) {
      scores.row(i) += Qh.row(i) * Arel.middleRows(n - 1 - i, n).transpose();
    }
    scores *= scale;

    const Eigen::MatrixXd probs = detail::softmax_rows(scores);
    Eigen::MatrixXd out = probs * Vh;
    for (int i = 0; i < n; ++i) {
      out.row(i) += probs.row(i) * Arel.middleRows(n - 1 - i, n);
    }
    concat.middleCols(h * dk, dk) = out;
    probs_per_head.push_back(probs);
  }

  Eigen::MatrixXd attn_out = concat * layer.W_O;
  if (trace) {
    trace->input = X;
    trace->Q = Q;
    trace->K = K;
    trace->V = V;
    trace->attn_probs = std::move(probs_per_head);
    trace->attn_concat = concat;
    trace->attn_out = attn_out;
  }
  return attn_out;
}

Eigen::MatrixXd ffn(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W1,
                    const Eigen::VectorXd& b1, const Eigen::MatrixXd& W2,
                    const Eigen::VectorXd& b2) {
  if (X.cols() != W1.rows() || W1.cols() != b1.size() || W1.cols() != W2.rows() ||
      W2.cols() != b2.size()) {
    throw SchemaError("ffn shape mismatch");
  }
  Eigen::MatrixXd pre = X * W1;
  pre.rowwise() += b1.transpose();
  Eigen::MatrixXd out = pre.cwiseMax(0.0) * W2;
  out.rowwise() += b2.transpose();
  return out;
}

ForwardResult encoder_forward(const std::vector<int>& tokens,
                              const std::vector<int>& segments,
                              const EncoderParameters& params,
                              const EncoderConfig& config,
                              const RelativePositionTable* table) {
  ForwardResult result;
  Eigen::MatrixXd h = embed_input(tokens, segments, params, config);
  result.trace.embedded = h;
  for (const auto& layer : params.layers) {
    LayerTrace lt;
    const Eigen::MatrixXd attn = attention_layer(h, layer, config, table, &lt);
    const Eigen::MatrixXd res1 = h + attn;
    const Eigen::MatrixXd norm1 = layer_norm(res1, layer.ln1_gain, layer.ln1_bias, &lt.ln1);

    Eigen::MatrixXd pre = norm1 * layer.W1;
    pre.rowwise() += layer.b1.transpose();
    const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
    Eigen::MatrixXd ffn_out = hidden * layer.W2;
    ffn_out.rowwise() += layer.b2.transpose();
    lt.ffn_pre = pre;
    lt.ffn_hidden = hidden;
    lt.ffn_out = ffn_out;

    const Eigen::MatrixXd res2 = norm1 + ffn_out;
    h = layer_norm(res2, layer.ln2_gain, layer.ln2_bias, &lt.ln2);
    result.trace.layers.push_back(std::move(lt));
  }
  result.hidden = h;
  result.cls = h.row(0).transpose();
  return result;
}

Gradients zero_gradients(const EncoderConfig& config) {
  Gradients g;
  g.token_embed = Eigen::MatrixXd::Zero(config.vocab_size, config.d_model);
  g.segment_embed = Eigen::MatrixXd::Zero(2, config.d_model);
  for (int l = 0; l < config.num_layers; ++l) g.layers.push_back(zero_layer(config));
  g.mlm_head = Eigen::MatrixXd::Zero(config.d_model, config.vocab_size);
  g.nsp_head = Eigen::MatrixXd::Zero(config.d_model, 2);
  g.span_head = Eigen::MatrixXd::Zero(config.d_model, 2);
  g.cls_head = Eigen::MatrixXd::Zero(config.d_model, 2);
  return g;
}

LossBreakdown pretrain_loss(const std::vector<PretrainExample>& batch,
                            const EncoderParameters& params,
                            const EncoderConfig& config,
                            const RelativePositionTable& table,
                            Gradients* grads) {
  if (batch.empty()) throw SchemaError("empty pretraining batch");

  std::size_t total_masked = 0;
  std::size_t total_tokens = 0;
  for (const auto& ex : batch) {
    total_masked += ex.masking.positions.size();
    total_tokens += ex.input_ids.size();
  }
  const double n_examples = static_cast<double>(batch.size());

  LossBreakdown loss;
  loss.mlm_empty = total_masked == 0;

  for (const auto& ex : batch) {
    const auto& segments = ex.seq.segment_ids;
    const ForwardResult fwd =
        encoder_forward(ex.input_ids, segments, params, config, &table);
    const int n = static_cast<int>(ex.input_ids.size());
    Eigen::MatrixXd dHidden = Eigen::MatrixXd::Zero(n, config.d_model);

    for (const auto& mp : ex.masking.positions) {
      const Eigen::RowVectorXd logits = fwd.hidden.row(mp.position) * params.mlm_head;
      Eigen::RowVectorXd dlogits;
      loss.mlm += detail::cross_entropy(logits, mp.label_id, grads ? &dlogits : nullptr);
      if (grads) {
        dlogits /= static_cast<double>(total_masked);
        grads->mlm_head += fwd.hidden.row(mp.position).transpose() * dlogits;
        dHidden.row(mp.position) += dlogits * params.mlm_head.transpose();
      }
    }

    {
      const Eigen::RowVectorXd logits = fwd.hidden.row(0) * params.nsp_head;
      const int label = ex.is_next ? 1 : 0;
      Eigen::RowVectorXd dlogits;
      loss.nsp += detail::cross_entropy(logits, label, grads ? &dlogits : nullptr);
      if (grads) {
        dlogits /= n_examples;
        grads->nsp_head += fwd.hidden.row(0).transpose() * dlogits;
        dHidden.row(0) += dlogits * params.nsp_head.transpose();
      }
    }

    for (int t = 0; t < n; ++t) {
      const bool in_span = ex.span && t >= ex.span->begin && t < ex.span->end;
      const Eigen::RowVectorXd logits = fwd.hidden.row(t) * params.span_head;
      Eigen::RowVectorXd dlogits;
      loss.span += detail::cross_entropy(logits, in_span ? 1 : 0,
                                         grads ? &dlogits : nullptr);
      if (grads) {
        dlogits /= static_cast<double>(total_tokens);
        grads->span_head += fwd.hidden.row(t).transpose() * dlogits;
        dHidden.row(t) += dlogits * params.span_head.transpose();
      }
    }

    if (grads) {
      encoder_backward(fwd.trace, ex.input_ids, segments, params, config, &table,
                       dHidden, *grads);
    }
  }

  if (total_masked > 0) loss.mlm /= static_cast<double>(total_masked);
  loss.nsp /= n_examples;
  loss.span /= static_cast<double>(total_tokens);
  loss.total = loss.mlm + loss.nsp + loss.span;
  return loss;
}

namespace {

// EncoderParameters and Gradients are member-for-member identical, so
// one walk serves both.
template <typename ParamsLike>
std::vector<TensorRef> collect_refs(ParamsLike& p) {
  std::vector<TensorRef> refs;
  auto add = [&refs](const std::string& name, Eigen::MatrixXd& m) {
    refs.push_back({name, m.data(), m.size()});
  };
  auto addv = [&refs](const std::string& name, Eigen::VectorXd& v) {
    refs.push_back({name, v.data(), v.size()});
  };
  add("token_embed", p.token_embed);
  add("segment_embed", p.segment_embed);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    auto& layer = p.layers[l];
    add(prefix + "W_Q", layer.W_Q);
    add(prefix + "W_K", layer.W_K);
    add(prefix + "W_V", layer.W_V);
    add(prefix + "W_O", layer.W_O);
    addv(prefix + "ln1_gain", layer.ln1_gain);
    addv(prefix + "ln1_bias", layer.ln1_bias);
    add(prefix + "W1", layer.W1);
    addv(prefix + "b1", layer.b1);
    add(prefix + "W2", layer.W2);
    addv(prefix + "b2", layer.b2);
    addv(prefix + "ln2_gain", layer.ln2_gain);
    addv(prefix + "ln2_bias", layer.ln2_bias);
  }
  add("mlm_head", p.mlm_head);
  add("nsp_head", p.nsp_head);
  add("span_head", p.span_head);
  add("cls_head", p.cls_head);
  return refs;
}

}  // namespace

std::vector<TensorRef> tensor_refs(EncoderParameters& p) { return collect_refs(p); }
std::vector<TensorRef> tensor_refs(Gradients& g) { return collect_refs(g); }

}  // namespace aif
