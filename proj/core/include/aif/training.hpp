#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "aif/corpus.hpp"
#include "aif/encoder.hpp"

namespace aif {

struct OptimizerSettings {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainSettings {
  int steps = 200;
  int batch_size = 8;
  double mask_rate = 0.15;
  OptimizerSettings optimizer;
};

struct TrainLogRow {
  int step = 0;
  double mlm = 0.0;
  double nsp = 0.0;
  double span = 0.0;
  double total = 0.0;
};

struct PretrainResult {
  EncoderParameters params;
  std::vector<TrainLogRow> log;
};

// Adaptive-moment pretraining from a fresh seeded init. Deterministic:
// the config seed fixes the init, the batch stream and therefore every
// parameter byte. Throws NumericError on a non-finite loss.
PretrainResult train(const std::vector<std::string>& corpus, const Lexicon& lexicon,
                     const Vocabulary& vocab, const EncoderConfig& config,
                     const TrainSettings& settings);

struct FineTuneSettings {
  int batch_size = 16;
  int epochs = 10;
  double validation_fraction = 0.2;
  OptimizerSettings optimizer;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct FineTuneResult {
  EncoderParameters params;  // snapshot of the best validation epoch
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 0 when epochs = 0
};

// Binary classification over "[CLS] word [SEP] text [SEP]". Labels are
// rebalanced 1:1 by seeded downsampling, then split per class into
// train/validation. Requires both labels present.
FineTuneResult fine_tune(const std::vector<FineTuneExample>& examples,
                         const EncoderParameters& params, const EncoderConfig& config,
                         const Lexicon& lexicon, const Vocabulary& vocab,
                         const RelativePositionTable& table,
                         const FineTuneSettings& settings, std::uint64_t rng_seed);

// [CLS] vector of "[CLS] word [SEP]". Throws SchemaError on empty words.
Eigen::VectorXd embed_word(const std::string& word, const EncoderParameters& params,
                           const EncoderConfig& config, const Lexicon& lexicon,
                           const Vocabulary& vocab, const RelativePositionTable& table);

}  // namespace aif
