#pragma once

#include <filesystem>

#include "aif/encoder.hpp"

namespace aif {

// Flat binary container. Header: magic "AIFX1" then eight little-endian
// int32 config fields (num_layers, num_heads, d_model, d_ff, vocab_size,
// max_seq_len, rpe_dim, rng_seed). Body: tensors as little-endian float64,
// row-major, in declared order: token_embed, segment_embed, per layer
// [W_Q, W_K, W_V, W_O, ln1_gain, ln1_bias, W1, b1, W2, b2, ln2_gain,
// ln2_bias], then mlm_head, nsp_head, span_head, cls_head.

struct Checkpoint {
  EncoderConfig config;
  EncoderParameters params;
};

void save_checkpoint(const std::filesystem::path& path, const EncoderConfig& config,
                     const EncoderParameters& params);

// Throws SchemaError on bad magic, truncation or trailing bytes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aif
