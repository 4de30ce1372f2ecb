// Micro benchmarks for the hot paths: segmentation, batch assembly,
// encoder forward/backward, and the index/analytics numerics.
#include <benchmark/benchmark.h>

#include <aif/analytics.hpp>
#include <aif/corpus.hpp>
#include <aif/encoder.hpp>
#include <aif/expansion.hpp>
#include <aif/index_engine.hpp>
#include <aif/rng.hpp>

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace aif;

const std::vector<std::string>& bench_corpus() {
  static const std::vector<std::string> docs = [] {
    const std::vector<std::string> chars = {"投", "资", "电", "网", "基", "建",
                                            "数", "据", "中", "心", "项", "目",
                                            "发", "展", "规", "划"};
    Rng rng(7);
    std::vector<std::string> out;
    for (int d = 0; d < 40; ++d) {
      std::string doc;
      for (int s = 0; s < 5; ++s) {
        const int len = 6 + static_cast<int>(rng.below(10));
        for (int i = 0; i < len; ++i) doc += chars[rng.below(chars.size())];
        doc += "\xe3\x80\x82";  // 。
      }
      out.push_back(doc);
    }
    return out;
  }();
  return docs;
}

const Lexicon& bench_lexicon() {
  static const Lexicon lex = make_lexicon(
      {"投资", "电网", "基建", "数据中心", "项目", "发展", "规划"});
  return lex;
}

const Vocabulary& bench_vocab() {
  static const Vocabulary vocab = build_vocabulary(bench_corpus(), bench_lexicon());
  return vocab;
}

EncoderConfig bench_config() {
  EncoderConfig config;
  config.num_layers = 2;
  config.num_heads = 2;
  config.d_model = 32;
  config.d_ff = 64;
  config.vocab_size = bench_vocab().size();
  config.max_seq_len = 64;
  config.rng_seed = 42;
  return config;
}

void BM_Utf8Chars(benchmark::State& state) {
  std::string text;
  for (const auto& doc : bench_corpus()) text += doc;
  for (auto _ : state) {
    benchmark::DoNotOptimize(utf8_chars(text));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_Utf8Chars);

void BM_Segment(benchmark::State& state) {
  std::string text;
  for (const auto& doc : bench_corpus()) text += doc;
  for (auto _ : state) {
    benchmark::DoNotOptimize(segment(text, bench_lexicon()));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_Segment);

void BM_PretrainBatch(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(make_pretrain_batch(bench_corpus(), bench_lexicon(),
                                                 bench_vocab(), batch, 0.15, 64,
                                                 seed++));
  }
}
BENCHMARK(BM_PretrainBatch)->Arg(8)->Arg(64);

void BM_RpeTable(benchmark::State& state) {
  const int d_z = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_rpe_table(128, d_z));
  }
}
BENCHMARK(BM_RpeTable)->Arg(16)->Arg(64);

void BM_EncoderForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const EncoderConfig config = bench_config();
  const EncoderParameters params = init_parameters(config);
  const RelativePositionTable table =
      build_rpe_table(config.max_seq_len, config.effective_rpe_dim());

  Rng rng(5);
  std::vector<int> tokens(n), segments(n);
  tokens[0] = Vocabulary::kCls;
  for (int i = 1; i < n; ++i) {
    tokens[i] = Vocabulary::kNumSpecial +
                static_cast<int>(rng.below(config.vocab_size - Vocabulary::kNumSpecial));
    segments[i] = i > n / 2 ? 1 : 0;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(encoder_forward(tokens, segments, params, config, &table));
  }
}
BENCHMARK(BM_EncoderForward)->Arg(16)->Arg(32)->Arg(64);

void BM_PretrainStep(benchmark::State& state) {
  const EncoderConfig config = bench_config();
  EncoderParameters params = init_parameters(config);
  const RelativePositionTable table =
      build_rpe_table(config.max_seq_len, config.effective_rpe_dim());
  const auto batch = make_pretrain_batch(bench_corpus(), bench_lexicon(), bench_vocab(),
                                         8, 0.15, config.max_seq_len, 1);
  for (auto _ : state) {
    Gradients grads = zero_gradients(config);
    benchmark::DoNotOptimize(pretrain_loss(batch, params, config, table, &grads));
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_PretrainStep);

void BM_EntropyWeights(benchmark::State& state) {
  Rng rng(13);
  Eigen::MatrixXd panel(60, 10);
  for (int i = 0; i < panel.rows(); ++i) {
    for (int j = 0; j < panel.cols(); ++j) panel(i, j) = rng.uniform();
  }
  std::vector<std::string> names;
  for (int j = 0; j < panel.cols(); ++j) names.push_back("w" + std::to_string(j));
  for (auto _ : state) {
    benchmark::DoNotOptimize(entropy_weights(panel, names));
  }
}
BENCHMARK(BM_EntropyWeights);

void BM_NormalizePanel(benchmark::State& state) {
  Rng rng(17);
  Eigen::MatrixXd panel(365, 10);
  for (int i = 0; i < panel.rows(); ++i) {
    for (int j = 0; j < panel.cols(); ++j) panel(i, j) = rng.normal(100.0, 25.0);
  }
  const std::vector<Polarity> polarities(10, Polarity::kPositive);
  const NormalizationStats stats = column_stats(panel);
  for (auto _ : state) {
    benchmark::DoNotOptimize(normalize_panel(panel, polarities, stats));
  }
}
BENCHMARK(BM_NormalizePanel);

void BM_RankCandidates(benchmark::State& state) {
  Rng rng(23);
  const int dim = 32;
  std::map<std::string, Eigen::VectorXd> candidates;
  for (int c = 0; c < 500; ++c) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = rng.normal();
    candidates["cand" + std::to_string(c)] = v.normalized();
  }
  std::vector<Eigen::VectorXd> seeds;
  for (int s = 0; s < 3; ++s) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = rng.normal();
    seeds.push_back(v.normalized());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(rank_candidates("bench", seeds, candidates));
  }
}
BENCHMARK(BM_RankCandidates);

void BM_OlsRegress(benchmark::State& state) {
  Rng rng(29);
  const int n = 240, k = 8;
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) X(i, j) = rng.normal();
    y(i) = X.row(i).sum() + rng.normal(0.0, 0.5);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ols_regress(y, X));
  }
}
BENCHMARK(BM_OlsRegress);

}  // namespace

BENCHMARK_MAIN();
