#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "aif/encoder.hpp"
#include "aif/errors.hpp"
#include "aif/rng.hpp"

using namespace aif;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double sd) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, sd);
  }
  return m;
}

// Straight-line single-head attention, relative terms included.
Eigen::MatrixXd attention_oracle(const Eigen::MatrixXd& X, const LayerParameters& p,
                                 const EncoderConfig& config,
                                 const RelativePositionTable* table) {
  const int n = static_cast<int>(X.rows());
  const int H = config.num_heads;
  const int dk = config.d_k();
  const Eigen::MatrixXd Q = X * p.W_Q, K = X * p.W_K, V = X * p.W_V;
  Eigen::MatrixXd concat(n, config.d_model);
  for (int h = 0; h < H; ++h) {
    const auto Qh = Q.middleCols(h * dk, dk);
    const auto Kh = K.middleCols(h * dk, dk);
    const auto Vh = V.middleCols(h * dk, dk);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd scores(n);
      for (int j = 0; j < n; ++j) {
        Eigen::RowVectorXd alpha = Eigen::RowVectorXd::Zero(dk);
        if (table) alpha = table->row(j - i);
        scores(j) = Qh.row(i).dot(Kh.row(j) + alpha) / std::sqrt(double(dk));
      }
      const Eigen::VectorXd e = (scores.array() - scores.maxCoeff()).exp();
      const Eigen::VectorXd probs = e / e.sum();
      Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(dk);
      for (int j = 0; j < n; ++j) {
        Eigen::RowVectorXd alpha = Eigen::RowVectorXd::Zero(dk);
        if (table) alpha = table->row(j - i);
        out += probs(j) * (Vh.row(j) + alpha);
      }
      concat.block(i, h * dk, 1, dk) = out;
    }
  }
  return concat * p.W_O;
}

EncoderConfig tiny_config(int layers, int heads, int d_model, int d_ff, int vocab) {
  EncoderConfig c;
  c.num_layers = layers;
  c.num_heads = heads;
  c.d_model = d_model;
  c.d_ff = d_ff;
  c.vocab_size = vocab;
  c.max_seq_len = 16;
  c.rng_seed = 7;
  return c;
}

}  // namespace

TEST_CASE("rpe table matches the sinusoidal closed form") {
  for (int d_z : {2, 8}) {
    const auto table = build_rpe_table(16, d_z);
    CHECK(table.values.rows() == 31);
    for (int delta = -15; delta <= 15; ++delta) {
      const Eigen::RowVectorXd row = rpe_lookup(delta, table);
      for (int k = 0; 2 * k < d_z; ++k) {
        const double angle = delta / std::pow(10000.0, 2.0 * k / d_z);
        CHECK(row(2 * k) == doctest::Approx(std::sin(angle)).epsilon(1e-12));
        CHECK(row(2 * k + 1) == doctest::Approx(std::cos(angle)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("rpe at delta zero is exactly the (0, 1) pattern") {
  const auto table = build_rpe_table(8, 6);
  const Eigen::RowVectorXd row = rpe_lookup(0, table);
  for (int k = 0; k < 6; k += 2) {
    CHECK(row(k) == 0.0);
    CHECK(row(k + 1) == 1.0);
  }
}

TEST_CASE("rpe frozen spot values") {
  const auto table = build_rpe_table(4, 2);
  CHECK(rpe_lookup(1, table)(0) == doctest::Approx(0.8414709848).epsilon(1e-9));
  CHECK(rpe_lookup(1, table)(1) == doctest::Approx(0.5403023059).epsilon(1e-9));
  const auto wide = build_rpe_table(4, 8);
  CHECK(rpe_lookup(1, wide)(2) == doctest::Approx(std::sin(0.1)).epsilon(1e-12));
}

TEST_CASE("rpe rejects out-of-range deltas") {
  const auto table = build_rpe_table(4, 2);
  CHECK_THROWS_AS(rpe_lookup(4, table), SchemaError);
  CHECK_THROWS_AS(rpe_lookup(-4, table), SchemaError);
}

TEST_CASE("attention with zero alpha equals a brute-force oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int heads = 1 + static_cast<int>(rng.below(2));
    const int dk = 2 + static_cast<int>(rng.below(3));
    const int d_model = heads * dk;
    const int n = 1 + static_cast<int>(rng.below(8));
    const auto config = tiny_config(1, heads, d_model, 8, 10);
    LayerParameters p;
    p.W_Q = random_matrix(rng, d_model, d_model, 0.5);
    p.W_K = random_matrix(rng, d_model, d_model, 0.5);
    p.W_V = random_matrix(rng, d_model, d_model, 0.5);
    p.W_O = random_matrix(rng, d_model, d_model, 0.5);
    const Eigen::MatrixXd X = random_matrix(rng, n, d_model, 1.0);

    const Eigen::MatrixXd got = attention_layer(X, p, config, nullptr, nullptr);
    const Eigen::MatrixXd want = attention_oracle(X, p, config, nullptr);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("attention with relative terms matches the oracle too") {
  Rng rng(13);
  const auto config = tiny_config(1, 2, 8, 8, 10);
  const auto table = build_rpe_table(config.max_seq_len, config.d_k());
  LayerParameters p;
  p.W_Q = random_matrix(rng, 8, 8, 0.5);
  p.W_K = random_matrix(rng, 8, 8, 0.5);
  p.W_V = random_matrix(rng, 8, 8, 0.5);
  p.W_O = random_matrix(rng, 8, 8, 0.5);
  const Eigen::MatrixXd X = random_matrix(rng, 6, 8, 1.0);
  const Eigen::MatrixXd got = attention_layer(X, p, config, &table, nullptr);
  const Eigen::MatrixXd want = attention_oracle(X, p, config, &table);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("attention probability rows sum to one") {
  Rng rng(17);
  const auto config = tiny_config(1, 2, 8, 8, 10);
  const auto table = build_rpe_table(config.max_seq_len, config.d_k());
  LayerParameters p;
  p.W_Q = random_matrix(rng, 8, 8, 0.8);
  p.W_K = random_matrix(rng, 8, 8, 0.8);
  p.W_V = random_matrix(rng, 8, 8, 0.8);
  p.W_O = random_matrix(rng, 8, 8, 0.8);
  const Eigen::MatrixXd X = random_matrix(rng, 7, 8, 2.0);
  LayerTrace trace;
  attention_layer(X, p, config, &table, &trace);
  for (const auto& probs : trace.attn_probs) {
    for (int i = 0; i < probs.rows(); ++i) {
      CHECK(probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(probs.row(i).minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("single position attends only to itself") {
  Rng rng(19);
  const auto config = tiny_config(1, 1, 4, 8, 10);
  LayerParameters p;
  p.W_Q = random_matrix(rng, 4, 4, 0.5);
  p.W_K = random_matrix(rng, 4, 4, 0.5);
  p.W_V = random_matrix(rng, 4, 4, 0.5);
  p.W_O = Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd X = random_matrix(rng, 1, 4, 1.0);
  const Eigen::MatrixXd out = attention_layer(X, p, config, nullptr, nullptr);
  CHECK((out - X * p.W_V).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("layer norm rows are standardized before gain and bias") {
  Rng rng(23);
  const Eigen::MatrixXd X = random_matrix(rng, 5, 32, 3.0);
  Eigen::VectorXd gain = Eigen::VectorXd::Constant(32, 2.0);
  Eigen::VectorXd bias = Eigen::VectorXd::Constant(32, -1.0);
  LayerNormTrace trace;
  const Eigen::MatrixXd out = layer_norm(X, gain, bias, &trace);
  for (int i = 0; i < 5; ++i) {
    const double mean = trace.normalized.row(i).mean();
    const double var = trace.normalized.row(i).squaredNorm() / 32.0 - mean * mean;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  const Eigen::MatrixXd expect =
      (trace.normalized * gain.asDiagonal()).rowwise() + bias.transpose();
  CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ffn worked examples") {
  Eigen::MatrixXd X(1, 2);
  X << 1.0, -1.0;
  const Eigen::MatrixXd W1 = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd b1 = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd W2(2, 1);
  W2 << 1.0, 1.0;
  Eigen::VectorXd b2(1);
  b2 << 0.5;
  const Eigen::MatrixXd out = ffn(X, W1, b1, W2, b2);
  CHECK(out(0, 0) == doctest::Approx(1.5).epsilon(1e-12));

  // zero input and nonpositive b1: relu kills the hidden layer
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(3, 2);
  Eigen::VectorXd negb1(2);
  negb1 << -0.5, 0.0;
  const Eigen::MatrixXd out2 = ffn(Z, W1, negb1, W2, b2);
  for (int i = 0; i < 3; ++i) CHECK(out2(i, 0) == doctest::Approx(0.5));
}

TEST_CASE("embed_input sums token and segment rows") {
  auto config = tiny_config(0, 1, 4, 8, 6);
  auto params = init_parameters(config);
  const std::vector<int> tokens{3, 5};
  const std::vector<int> segments{0, 1};
  const Eigen::MatrixXd X = embed_input(tokens, segments, params, config);
  CHECK((X.row(0) - (params.token_embed.row(3) + params.segment_embed.row(0)))
            .cwiseAbs().maxCoeff() < 1e-15);
  CHECK((X.row(1) - (params.token_embed.row(5) + params.segment_embed.row(1)))
            .cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(embed_input({6}, {0}, params, config), SchemaError);
}

TEST_CASE("zero-layer forward returns the embeddings") {
  auto config = tiny_config(0, 1, 4, 8, 6);
  auto params = init_parameters(config);
  const auto table = build_rpe_table(config.max_seq_len, config.d_k());
  const std::vector<int> tokens{2, 4, 3};
  const std::vector<int> segments{0, 0, 0};
  const auto fwd = encoder_forward(tokens, segments, params, config, &table);
  CHECK((fwd.hidden - embed_input(tokens, segments, params, config))
            .cwiseAbs().maxCoeff() == 0.0);
  CHECK((fwd.cls.transpose() - fwd.hidden.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward is deterministic") {
  auto config = tiny_config(2, 2, 8, 16, 12);
  auto params = init_parameters(config);
  const auto table = build_rpe_table(config.max_seq_len, config.d_k());
  const std::vector<int> tokens{2, 5, 6, 7, 3};
  const std::vector<int> segments{0, 0, 0, 0, 0};
  const auto a = encoder_forward(tokens, segments, params, config, &table);
  const auto b = encoder_forward(tokens, segments, params, config, &table);
  CHECK((a.hidden - b.hidden).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("config validation rejects bad dimension combinations") {
  auto config = tiny_config(1, 3, 8, 16, 12);  // 8 % 3 != 0
  CHECK_THROWS_AS(config.validate(), SchemaError);
  config = tiny_config(1, 1, 3, 16, 12);  // d_k = 3 odd, rpe needs even
  CHECK_THROWS_AS(config.validate(), SchemaError);
  config = tiny_config(1, 2, 8, 16, 12);
  config.rpe_dim = 6;  // must equal d_k to be addable to k/v rows
  CHECK_THROWS_AS(config.validate(), SchemaError);
  config.rpe_dim = 4;
  CHECK_NOTHROW(config.validate());
}

namespace {

// One pretraining example over a tiny vocabulary, masking plan written
// out by hand so the test controls every label.
PretrainExample handmade_example(bool is_next) {
  PretrainExample ex;
  ex.seq.tokens = {2, 5, 6, 7, 3, 8, 9, 3};  // [CLS] a b c [SEP] d e [SEP]
  ex.seq.segment_ids = {0, 0, 0, 0, 0, 1, 1, 1};
  ex.seq.word_spans = {{0, 1}, {1, 3}, {3, 4}, {4, 5}, {5, 7}, {7, 8}};
  ex.is_next = is_next;
  ex.masking.positions = {
      {1, Replacement::kMask, 4, 5},
      {2, Replacement::kMask, 4, 6},
      {3, Replacement::kRandom, 9, 7},
  };
  ex.span = SpanTarget{5, 7};
  ex.input_ids = {2, 4, 4, 9, 3, 4, 4, 3};
  return ex;
}

double numeric_loss(const std::vector<PretrainExample>& batch,
                    EncoderParameters& params, const EncoderConfig& config,
                    const RelativePositionTable& table) {
  return pretrain_loss(batch, params, config, table, nullptr).total;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  EncoderConfig config = tiny_config(1, 2, 8, 16, 10);
  config.validate();
  const auto table = build_rpe_table(config.max_seq_len, config.effective_rpe_dim());

  // Healthy parameter scale; N(0, 0.02^2) init would leave most numeric
  // gradients down in the finite-difference noise floor.
  EncoderParameters params = init_parameters(config);
  Rng rng(99);
  for (auto& ref : tensor_refs(params)) {
    const bool is_gain = ref.name.find("ln") != std::string::npos &&
                         ref.name.find("gain") != std::string::npos;
    for (std::ptrdiff_t i = 0; i < ref.size; ++i) {
      ref.data[i] = is_gain ? 1.0 + 0.1 * rng.normal() : rng.normal(0.0, 0.3);
    }
  }

  const std::vector<PretrainExample> batch = {handmade_example(true),
                                              handmade_example(false)};

  Gradients grads = zero_gradients(config);
  pretrain_loss(batch, params, config, table, &grads);

  const double eps = 1e-4;
  double worst = 0.0;
  auto param_refs = tensor_refs(params);
  auto grad_refs = tensor_refs(grads);
  REQUIRE(param_refs.size() == grad_refs.size());
  for (std::size_t t = 0; t < param_refs.size(); ++t) {
    REQUIRE(param_refs[t].size == grad_refs[t].size);
    for (std::ptrdiff_t i = 0; i < param_refs[t].size; ++i) {
      double& theta = param_refs[t].data[i];
      const double saved = theta;
      theta = saved + eps;
      const double up = numeric_loss(batch, params, config, table);
      theta = saved - eps;
      const double down = numeric_loss(batch, params, config, table);
      theta = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = grad_refs[t].data[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("uniform mlm logits cost ln V per masked token") {
  EncoderConfig config = tiny_config(1, 2, 8, 16, 10);
  auto params = init_parameters(config);
  const auto table = build_rpe_table(config.max_seq_len, config.effective_rpe_dim());
  params.mlm_head.setZero();  // uniform distribution over the vocabulary
  const std::vector<PretrainExample> batch = {handmade_example(true)};
  const auto loss = pretrain_loss(batch, params, config, table, nullptr);
  CHECK(loss.mlm == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK_FALSE(loss.mlm_empty);
}

TEST_CASE("batch with no masked positions sets the warning flag") {
  EncoderConfig config = tiny_config(1, 2, 8, 16, 10);
  auto params = init_parameters(config);
  const auto table = build_rpe_table(config.max_seq_len, config.effective_rpe_dim());
  auto ex = handmade_example(true);
  ex.masking.positions.clear();
  ex.span.reset();
  ex.input_ids = ex.seq.tokens;
  const auto loss = pretrain_loss({ex}, params, config, table, nullptr);
  CHECK(loss.mlm == 0.0);
  CHECK(loss.mlm_empty);
}

TEST_CASE("checkpoint tensor order starts with embeddings and ends with heads") {
  EncoderConfig config = tiny_config(2, 2, 8, 16, 10);
  auto params = init_parameters(config);
  const auto refs = tensor_refs(params);
  REQUIRE(refs.size() == 2 + 2 * 12 + 4);
  CHECK(refs.front().name == "token_embed");
  CHECK(refs[1].name == "segment_embed");
  CHECK(refs.back().name == "cls_head");
}
