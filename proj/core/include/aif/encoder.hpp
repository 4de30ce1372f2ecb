#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "aif/corpus.hpp"

namespace aif {

struct EncoderConfig {
  int num_layers = 2;
  int num_heads = 2;
  int d_model = 32;
  int d_ff = 64;
  int vocab_size = 0;   // filled once the vocabulary is known
  int max_seq_len = 64;
  int rpe_dim = 0;      // 0 means d_k; must be even
  int rng_seed = 0;

  int d_k() const { return d_model / num_heads; }
  int effective_rpe_dim() const { return rpe_dim > 0 ? rpe_dim : d_k(); }

  // Throws SchemaError on dimension violations.
  void validate() const;
};

struct LayerParameters {
  Eigen::MatrixXd W_Q, W_K, W_V, W_O;  // d_model x d_model
  Eigen::VectorXd ln1_gain, ln1_bias;  // d_model
  Eigen::MatrixXd W1;                  // d_model x d_ff
  Eigen::VectorXd b1;                  // d_ff
  Eigen::MatrixXd W2;                  // d_ff x d_model
  Eigen::VectorXd b2;                  // d_model
  Eigen::VectorXd ln2_gain, ln2_bias;  // d_model
};

struct EncoderParameters {
  Eigen::MatrixXd token_embed;    // vocab_size x d_model
  Eigen::MatrixXd segment_embed;  // 2 x d_model
  std::vector<LayerParameters> layers;
  Eigen::MatrixXd mlm_head;   // d_model x vocab_size
  Eigen::MatrixXd nsp_head;   // d_model x 2
  Eigen::MatrixXd span_head;  // d_model x 2
  Eigen::MatrixXd cls_head;   // d_model x 2
};

// Weights ~ N(0, 0.02^2) from the config seed, biases zero, layernorm
// gains one.
EncoderParameters init_parameters(const EncoderConfig& config);

// Sinusoidal table over signed distances. Row r holds delta = r - (max_len-1):
//   alpha[delta][2k]   = sin(delta / 10000^(2k/d_z))
//   alpha[delta][2k+1] = cos(delta / 10000^(2k/d_z))
struct RelativePositionTable {
  int max_seq_len = 0;
  int d_z = 0;
  Eigen::MatrixXd values;  // (2*max_seq_len - 1) x d_z

  // Throws SchemaError when |delta| >= max_seq_len.
  Eigen::RowVectorXd row(int delta) const;
};

RelativePositionTable build_rpe_table(int max_seq_len, int d_z);

inline Eigen::RowVectorXd rpe_lookup(int delta, const RelativePositionTable& table) {
  return table.row(delta);
}

struct LayerNormTrace {
  Eigen::MatrixXd input;
  Eigen::MatrixXd normalized;  // rows before gain/bias
  Eigen::VectorXd inv_std;     // per row, 1/sqrt(var + eps)
};

struct LayerTrace {
  Eigen::MatrixXd input;
  Eigen::MatrixXd Q, K, V;                  // n x d_model, heads packed
  std::vector<Eigen::MatrixXd> attn_probs;  // per head, n x n rows summing to 1
  Eigen::MatrixXd attn_concat;              // before W_O
  Eigen::MatrixXd attn_out;
  LayerNormTrace ln1;
  Eigen::MatrixXd ffn_pre;     // before relu
  Eigen::MatrixXd ffn_hidden;  // after relu
  Eigen::MatrixXd ffn_out;
  LayerNormTrace ln2;
};

struct ForwardTrace {
  Eigen::MatrixXd embedded;
  std::vector<LayerTrace> layers;
};

inline constexpr double kLayerNormEps = 1e-5;

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& X, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias, LayerNormTrace* trace);

// Row t = token_embed[tokens[t]] + segment_embed[segments[t]].
Eigen::MatrixXd embed_input(const std::vector<int>& tokens,
                            const std::vector<int>& segments,
                            const EncoderParameters& params,
                            const EncoderConfig& config);

// Multi-head attention with relative position terms in both the scores
// and the values; heads concatenated and projected by W_O. A null table
// means alpha = 0, plain scaled dot-product attention.
Eigen::MatrixXd attention_layer(const Eigen::MatrixXd& X, const LayerParameters& layer,
                                const EncoderConfig& config,
                                const RelativePositionTable* table, LayerTrace* trace);

// max(0, X W1 + b1) W2 + b2.
Eigen::MatrixXd ffn(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W1,
                    const Eigen::VectorXd& b1, const Eigen::MatrixXd& W2,
                    const Eigen::VectorXd& b2);

struct ForwardResult {
  Eigen::MatrixXd hidden;  // n x d_model
  Eigen::VectorXd cls;     // hidden row 0
  ForwardTrace trace;
};

ForwardResult encoder_forward(const std::vector<int>& tokens,
                              const std::vector<int>& segments,
                              const EncoderParameters& params,
                              const EncoderConfig& config,
                              const RelativePositionTable* table);

// Same shapes as EncoderParameters, zero-initialized.
struct Gradients {
  Eigen::MatrixXd token_embed;
  Eigen::MatrixXd segment_embed;
  std::vector<LayerParameters> layers;
  Eigen::MatrixXd mlm_head, nsp_head, span_head, cls_head;
};

Gradients zero_gradients(const EncoderConfig& config);

// Backpropagates dHidden (gradient at the final hidden states) through
// the stack and embeddings, accumulating into grads.
void encoder_backward(const ForwardTrace& trace, const std::vector<int>& tokens,
                      const std::vector<int>& segments,
                      const EncoderParameters& params, const EncoderConfig& config,
                      const RelativePositionTable* table,
                      const Eigen::MatrixXd& dHidden, Gradients& grads);

// Flat view of one learnable tensor. The order returned by tensor_refs
// is the checkpoint's declared tensor order.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::ptrdiff_t size = 0;
};

std::vector<TensorRef> tensor_refs(EncoderParameters& params);
std::vector<TensorRef> tensor_refs(Gradients& grads);

struct LossBreakdown {
  double mlm = 0.0;
  double nsp = 0.0;
  double span = 0.0;
  double total = 0.0;
  bool mlm_empty = false;  // batch had no masked positions
};

// Combined pretraining loss: mean masked-token cross-entropy + mean NSP
// cross-entropy + mean per-token span cross-entropy. Pass grads to also
// accumulate exact analytic gradients (batch-mean scaled).
LossBreakdown pretrain_loss(const std::vector<PretrainExample>& batch,
                            const EncoderParameters& params,
                            const EncoderConfig& config,
                            const RelativePositionTable& table,
                            Gradients* grads);

}  // namespace aif
