#include "aif/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>

#include "aif/analytics.hpp"
#include "aif/checkpoint.hpp"
#include "aif/csv.hpp"
#include "aif/digest.hpp"
#include "aif/errors.hpp"
#include "aif/expansion.hpp"
#include "aif/index_engine.hpp"
#include "aif/io.hpp"
#include "aif/training.hpp"
#include "aif/version.hpp"

namespace aif {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::atomic<LogLevel> g_log_level{LogLevel::kInfo};

void log_at(LogLevel level, const char* tag, const std::string& message) {
  if (static_cast<int>(level) <= static_cast<int>(g_log_level.load())) {
    std::cerr << "[" << tag << "] " << message << "\n";
  }
}

}  // namespace

void set_log_level(LogLevel level) { g_log_level.store(level); }
LogLevel log_level() { return g_log_level.load(); }
void log_error(const std::string& message) { log_at(LogLevel::kError, "error", message); }
void log_info(const std::string& message) { log_at(LogLevel::kInfo, "info", message); }
void log_debug(const std::string& message) { log_at(LogLevel::kDebug, "debug", message); }

void init_logging_from_env() {
  const char* env = std::getenv("AIF_LOG");
  if (!env) return;
  const std::string value = env;
  if (value == "error") {
    set_log_level(LogLevel::kError);
  } else if (value == "info") {
    set_log_level(LogLevel::kInfo);
  } else if (value == "debug") {
    set_log_level(LogLevel::kDebug);
  } else {
    set_log_level(LogLevel::kInfo);
    log_error("unknown AIF_LOG value '" + value + "', using info");
  }
}

namespace {

// ---- config ----

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string require_string(const json& obj, const std::string& key,
                           const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    throw SchemaError("config: " + where + "." + key + " must be a string");
  }
  return obj[key].get<std::string>();
}

int get_int(const json& obj, const std::string& key, int fallback,
            const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) {
    throw SchemaError("config: " + where + "." + key + " must be an integer");
  }
  return obj[key].get<int>();
}

double get_double(const json& obj, const std::string& key, double fallback,
                  const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) {
    throw SchemaError("config: " + where + "." + key + " must be a number");
  }
  return obj[key].get<double>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback,
              const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) {
    throw SchemaError("config: " + where + "." + key + " must be a boolean");
  }
  return obj[key].get<bool>();
}

}  // namespace

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw SchemaError(e.what());
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("config " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("paths") || !doc["paths"].is_object()) {
    throw SchemaError("config " + path.string() + ": missing \"paths\" object");
  }

  RunConfig cfg;
  cfg.config_path = path;
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const json& paths = doc["paths"];
  cfg.corpus = resolve(base, require_string(paths, "corpus", "paths"));
  cfg.lexicon = resolve(base, require_string(paths, "lexicon", "paths"));
  cfg.stopwords = resolve(base, require_string(paths, "stopwords", "paths"));
  cfg.finetune_tsv = resolve(base, require_string(paths, "finetune", "paths"));
  cfg.hierarchy_csv = resolve(base, require_string(paths, "hierarchy", "paths"));
  cfg.panel_csv = resolve(base, require_string(paths, "panel", "paths"));
  cfg.investment_csv = resolve(base, require_string(paths, "investment", "paths"));
  cfg.availability = resolve(base, require_string(paths, "availability", "paths"));
  cfg.exclusions = resolve(base, require_string(paths, "exclusions", "paths"));
  cfg.out_dir = resolve(base, require_string(paths, "out_dir", "paths"));

  if (doc.contains("national_region")) {
    cfg.national_region = require_string(doc, "national_region", "config");
  }
  cfg.rng_seed = get_int(doc, "rng_seed", 0, "config");

  const json encoder = doc.value("encoder", json::object());
  cfg.encoder.num_layers = get_int(encoder, "num_layers", 2, "encoder");
  cfg.encoder.num_heads = get_int(encoder, "num_heads", 2, "encoder");
  cfg.encoder.d_model = get_int(encoder, "d_model", 32, "encoder");
  cfg.encoder.d_ff = get_int(encoder, "d_ff", 64, "encoder");
  cfg.encoder.max_seq_len = get_int(encoder, "max_seq_len", 64, "encoder");
  cfg.encoder.rpe_dim = get_int(encoder, "rpe_dim", 0, "encoder");

  const json pipeline = doc.value("pipeline", json::object());
  cfg.knobs.top_k = get_int(pipeline, "top_k", 50, "pipeline");
  cfg.knobs.screen_threshold =
      get_double(pipeline, "screen_threshold", 0.1, "pipeline");
  cfg.knobs.max_lag = get_int(pipeline, "max_lag", 5, "pipeline");
  cfg.knobs.mask_rate = get_double(pipeline, "mask_rate", 0.15, "pipeline");
  cfg.knobs.pretrain_steps = get_int(pipeline, "pretrain_steps", 200, "pipeline");
  cfg.knobs.pretrain_batch_size =
      get_int(pipeline, "pretrain_batch_size", 8, "pipeline");
  cfg.knobs.finetune_batch_size =
      get_int(pipeline, "finetune_batch_size", 16, "pipeline");
  cfg.knobs.finetune_epochs = get_int(pipeline, "finetune_epochs", 10, "pipeline");
  cfg.knobs.learning_rate = get_double(pipeline, "learning_rate", 5e-4, "pipeline");
  cfg.knobs.interpolate_gaps = get_bool(pipeline, "interpolate_gaps", false, "pipeline");
  cfg.knobs.jan_adjust = get_bool(pipeline, "jan_adjust", true, "pipeline");
  return cfg;
}

namespace {

// ---- artifact layout ----

struct Artifacts {
  fs::path checkpoint, vocab, pretrain_log;
  fs::path checkpoint_finetuned, finetune_log;
  fs::path rankings, expansion, expanded_hierarchy;
  fs::path screening, weights, index_daily, index_monthly, index_annual;
  fs::path dimensions_annual, regions_annual, normalized_monthly;
  fs::path factor_scores, analysis;
  fs::path report;
  fs::path manifest;

  explicit Artifacts(const fs::path& out) {
    checkpoint = out / "checkpoint.bin";
    vocab = out / "vocab.txt";
    pretrain_log = out / "pretrain_log.csv";
    checkpoint_finetuned = out / "checkpoint_finetuned.bin";
    finetune_log = out / "finetune_log.csv";
    rankings = out / "rankings.csv";
    expansion = out / "expansion.csv";
    expanded_hierarchy = out / "expanded_hierarchy.csv";
    screening = out / "screening.csv";
    weights = out / "weights.csv";
    index_daily = out / "index_daily.csv";
    index_monthly = out / "index_monthly.csv";
    index_annual = out / "index_annual.csv";
    dimensions_annual = out / "dimensions_annual.csv";
    regions_annual = out / "regions_annual.csv";
    normalized_monthly = out / "normalized_monthly.csv";
    factor_scores = out / "factor_scores.csv";
    analysis = out / "analysis.json";
    report = out / "report.json";
    manifest = out / "manifest.json";
  }
};

void require_artifact(const fs::path& file, const std::string& consumer,
                      const std::string& producer) {
  if (!fs::exists(file)) {
    throw DependencyError("stage '" + consumer + "' needs '" +
                          file.filename().string() + "' from stage '" + producer +
                          "'; run `aif " + producer + "` first");
  }
}

std::vector<std::string> load_corpus(const fs::path& path) {
  std::vector<std::string> docs;
  for (auto& line : split_lines(read_text_file(path))) {
    if (!line.empty()) docs.push_back(std::move(line));
  }
  if (docs.empty()) throw SchemaError("empty corpus: " + path.string());
  return docs;
}

// ---- manifest ----

void update_manifest(const RunConfig& cfg, const std::string& stage,
                     const std::vector<fs::path>& inputs,
                     const std::vector<fs::path>& outputs, double elapsed_seconds) {
  const Artifacts art(cfg.out_dir);
  json manifest = json::object();
  if (fs::exists(art.manifest)) {
    try {
      manifest = json::parse(read_text_file(art.manifest));
    } catch (const json::parse_error&) {
      log_debug("manifest unreadable, rebuilding it");
      manifest = json::object();
    }
  }
  manifest["tool"] = kToolName;
  manifest["version"] = kToolVersion;
  manifest["seed"] = cfg.rng_seed;
  manifest["config_digest"] = sha256_file_hex(cfg.config_path);

  json in = json::object();
  for (const auto& p : inputs) in[p.string()] = sha256_file_hex(p);
  json out = json::object();
  for (const auto& p : outputs) out[p.filename().string()] = sha256_file_hex(p);
  manifest["stages"][stage] =
      json{{"inputs", in}, {"outputs", out}, {"elapsed_seconds", elapsed_seconds}};
  write_file_atomic(art.manifest, manifest.dump(2) + "\n");
}

// ---- stage: pretrain ----

std::vector<fs::path> run_pretrain(const RunConfig& cfg) {
  const Artifacts art(cfg.out_dir);
  const auto corpus = load_corpus(cfg.corpus);
  const Lexicon lexicon = load_lexicon(cfg.lexicon);
  const Vocabulary vocab = build_vocabulary(corpus, lexicon);
  log_info("pretrain: " + std::to_string(corpus.size()) + " documents, vocabulary of " +
           std::to_string(vocab.size()) + " tokens");

  EncoderConfig encoder = cfg.encoder;
  encoder.vocab_size = vocab.size();
  encoder.rng_seed = cfg.rng_seed;

  TrainSettings settings;
  settings.steps = cfg.knobs.pretrain_steps;
  settings.batch_size = cfg.knobs.pretrain_batch_size;
  settings.mask_rate = cfg.knobs.mask_rate;
  settings.optimizer.learning_rate = cfg.knobs.learning_rate;

  const PretrainResult result = train(corpus, lexicon, vocab, encoder, settings);
  log_info("pretrain: loss " + format_double(result.log.front().total) + " -> " +
           format_double(result.log.back().total) + " over " +
           std::to_string(settings.steps) + " steps");

  save_vocabulary(art.vocab, vocab);
  save_checkpoint(art.checkpoint, encoder, result.params);
  CsvTable log_table;
  log_table.header = {"step", "mlm_loss", "nsp_loss", "span_loss", "total"};
  for (const auto& row : result.log) {
    log_table.rows.push_back({std::to_string(row.step), format_double(row.mlm),
                              format_double(row.nsp), format_double(row.span),
                              format_double(row.total)});
  }
  write_csv_atomic(art.pretrain_log, log_table);
  return {art.checkpoint, art.vocab, art.pretrain_log};
}

// ---- stage: finetune ----

std::vector<fs::path> run_finetune(const RunConfig& cfg) {
  const Artifacts art(cfg.out_dir);
  require_artifact(art.checkpoint, "finetune", "pretrain");
  require_artifact(art.vocab, "finetune", "pretrain");

  const Checkpoint ckpt = load_checkpoint(art.checkpoint);
  const Vocabulary vocab = load_vocabulary(art.vocab);
  const Lexicon lexicon = load_lexicon(cfg.lexicon);
  const auto examples = load_finetune_tsv(cfg.finetune_tsv);
  const RelativePositionTable table =
      build_rpe_table(ckpt.config.max_seq_len, ckpt.config.effective_rpe_dim());

  FineTuneSettings settings;
  settings.batch_size = cfg.knobs.finetune_batch_size;
  settings.epochs = cfg.knobs.finetune_epochs;
  settings.optimizer.learning_rate = cfg.knobs.learning_rate;

  const FineTuneResult result =
      fine_tune(examples, ckpt.params, ckpt.config, lexicon, vocab, table, settings,
                static_cast<std::uint64_t>(cfg.rng_seed));
  if (!result.epochs.empty()) {
    log_info("finetune: best epoch " + std::to_string(result.best_epoch) +
             " with validation accuracy " +
             format_double(result.epochs[result.best_epoch - 1].val_accuracy));
  }

  save_checkpoint(art.checkpoint_finetuned, ckpt.config, result.params);
  CsvTable log_table;
  log_table.header = {"epoch", "train_accuracy", "val_accuracy"};
  for (const auto& row : result.epochs) {
    log_table.rows.push_back({std::to_string(row.epoch),
                              format_double(row.train_accuracy),
                              format_double(row.val_accuracy)});
  }
  write_csv_atomic(art.finetune_log, log_table);
  return {art.checkpoint_finetuned, art.finetune_log};
}

// ---- stage: expand ----

std::vector<fs::path> run_expand(const RunConfig& cfg) {
  const Artifacts art(cfg.out_dir);
  require_artifact(art.checkpoint_finetuned, "expand", "finetune");
  require_artifact(art.vocab, "expand", "pretrain");

  const Checkpoint ckpt = load_checkpoint(art.checkpoint_finetuned);
  const Vocabulary vocab = load_vocabulary(art.vocab);
  const Lexicon lexicon = load_lexicon(cfg.lexicon);
  const auto corpus = load_corpus(cfg.corpus);
  const auto stopwords = load_word_set(cfg.stopwords);
  const auto availability = load_word_set(cfg.availability);
  const auto exclusions = load_word_set(cfg.exclusions);
  const IndicatorHierarchy hierarchy = load_hierarchy_csv(cfg.hierarchy_csv);
  const RelativePositionTable table =
      build_rpe_table(ckpt.config.max_seq_len, ckpt.config.effective_rpe_dim());

  const auto names = hierarchy.entry_names();
  const std::set<std::string> seeds(names.begin(), names.end());
  const auto candidates = build_candidates(corpus, lexicon, stopwords, seeds);
  log_info("expand: " + std::to_string(candidates.size()) + " candidate words");

  std::map<std::string, Eigen::VectorXd> candidate_vectors;
  for (const auto& word : candidates) {
    candidate_vectors[word] =
        embed_word(word, ckpt.params, ckpt.config, lexicon, vocab, table);
  }

  std::vector<SimilarityRanking> rankings;
  for (const auto& primary : hierarchy.primaries) {
    for (const auto& secondary : primary.secondaries) {
      std::vector<Eigen::VectorXd> seed_vectors;
      for (const auto& entry : secondary.entries) {
        seed_vectors.push_back(
            embed_word(entry.name, ckpt.params, ckpt.config, lexicon, vocab, table));
      }
      rankings.push_back(
          rank_candidates(secondary.name, seed_vectors, candidate_vectors));
    }
  }

  const ExpansionResult result =
      expand_hierarchy(hierarchy, rankings, availability, exclusions, cfg.knobs.top_k);
  log_info("expand: hierarchy grew from " + std::to_string(names.size()) + " to " +
           std::to_string(result.expanded.entry_names().size()) + " entries");

  CsvTable rank_table;
  rank_table.header = {"secondary_indicator", "word", "score"};
  for (const auto& ranking : result.rankings) {
    for (const auto& sw : ranking.entries) {
      rank_table.rows.push_back({ranking.secondary, sw.word, format_double(sw.score)});
    }
  }
  write_csv_atomic(art.rankings, rank_table);

  CsvTable expansion_table;
  expansion_table.header = {"secondary_indicator", "word", "score", "provenance"};
  for (const auto& primary : result.expanded.primaries) {
    for (const auto& secondary : primary.secondaries) {
      for (const auto& entry : secondary.entries) {
        expansion_table.rows.push_back({secondary.name, entry.name,
                                        format_double(entry.score),
                                        to_string(entry.provenance)});
      }
    }
  }
  write_csv_atomic(art.expansion, expansion_table);

  save_hierarchy_csv(art.expanded_hierarchy, result.expanded);
  return {art.rankings, art.expansion, art.expanded_hierarchy};
}

// ---- stage: build-index ----

struct PanelBundle {
  IndicatorHierarchy hierarchy;           // expanded
  std::vector<std::string> kept;          // hierarchy order
  std::vector<Polarity> polarities;       // aligned with kept
  ScreeningReport screening;              // rows in hierarchy order
  Date span_begin, span_end;
  std::vector<RawPanel> raw_panels;
  int national_index = -1;
};

PanelBundle screen_and_prepare(const RunConfig& cfg) {
  const Artifacts art(cfg.out_dir);
  PanelBundle bundle;
  bundle.hierarchy = load_hierarchy_csv(art.expanded_hierarchy);
  bundle.raw_panels = load_raw_panels(cfg.panel_csv);
  for (std::size_t i = 0; i < bundle.raw_panels.size(); ++i) {
    if (bundle.raw_panels[i].region == cfg.national_region) {
      bundle.national_index = static_cast<int>(i);
    }
  }
  if (bundle.national_index < 0) {
    throw SchemaError("panel has no region '" + cfg.national_region + "'");
  }
  const RawPanel& national = bundle.raw_panels[bundle.national_index];

  // The analysis span is the national panel's observed date range.
  bool any = false;
  for (const auto& [keyword, series] : national.series) {
    if (series.empty()) continue;
    const Date first = series.begin()->first;
    const Date last = series.rbegin()->first;
    if (!any || first < bundle.span_begin) bundle.span_begin = first;
    if (!any || bundle.span_end < last) bundle.span_end = last;
    any = true;
  }
  if (!any) throw SchemaError("national panel is empty");

  // Screening runs over the national series of hierarchy entries only.
  const auto entry_names = bundle.hierarchy.entry_names();
  RawPanel national_entries;
  national_entries.region = national.region;
  for (const auto& name : entry_names) {
    const auto it = national.series.find(name);
    if (it != national.series.end()) national_entries.series[name] = it->second;
  }
  const MonthlySeries investment = load_investment_csv(cfg.investment_csv);
  const ScreeningReport raw_report =
      screen_indicators(national_entries, investment, cfg.knobs.screen_threshold,
                        bundle.span_begin, bundle.span_end);

  std::map<std::string, ScreeningRow> by_name;
  for (const auto& row : raw_report.rows) by_name[row.indicator] = row;
  for (const auto& name : entry_names) {
    const auto it = by_name.find(name);
    if (it != by_name.end()) {
      bundle.screening.rows.push_back(it->second);
    } else {
      // Absent from the panel altogether.
      bundle.screening.rows.push_back({name, 0.0, false, RemovalReason::kShortHistory});
    }
    const auto& row = bundle.screening.rows.back();
    if (row.kept) {
      bundle.screening.kept.push_back(name);
      bundle.kept.push_back(name);
      bundle.polarities.push_back(bundle.hierarchy.find_entry(name)->polarity);
    }
  }
  if (bundle.kept.empty()) {
    throw NumericError("screening removed every indicator");
  }
  log_info("build-index: screening kept " + std::to_string(bundle.kept.size()) +
           " of " + std::to_string(entry_names.size()) + " indicators");
  return bundle;
}

CsvTable series_table(const IndexSeries& series, const std::string& value_column) {
  CsvTable table;
  table.header = {"period", value_column};
  for (const auto& point : series.points) {
    table.rows.push_back({point.period, format_double(point.value)});
  }
  return table;
}

std::vector<fs::path> run_build_index(const RunConfig& cfg) {
  const Artifacts art(cfg.out_dir);
  require_artifact(art.expanded_hierarchy, "build-index", "expand");

  PanelBundle bundle = screen_and_prepare(cfg);

  std::vector<SeriesPanel> panels;
  int national_index = -1;
  for (const auto& raw : bundle.raw_panels) {
    if (raw.region == cfg.national_region) national_index = static_cast<int>(panels.size());
    panels.push_back(assemble_panel(raw, bundle.kept, bundle.span_begin,
                                    bundle.span_end, cfg.knobs.interpolate_gaps));
  }
  const SeriesPanel& national = panels[national_index];

  const NormalizationStats stats = column_stats(national.values);
  const Eigen::MatrixXd normalized =
      normalize_panel(national.values, bundle.polarities, stats);
  const WeightVector weights = entropy_weights(normalized, bundle.kept);

  const IndexSeries daily =
      composite_index(normalized, national.dates, bundle.kept, weights);
  const IndexSeries monthly = aggregate(daily, Frequency::kMonthly);
  const IndexSeries annual = aggregate(daily, Frequency::kAnnual);

  // Per-dimension annual series; a primary emptied by screening is
  // omitted here (the analyze stage reports it as an error).
  std::vector<std::pair<std::string, IndexSeries>> dimensions;
  for (const auto& primary : bundle.hierarchy.primaries) {
    bool has_member = false;
    for (const auto& secondary : primary.secondaries) {
      for (const auto& entry : secondary.entries) {
        if (std::find(bundle.kept.begin(), bundle.kept.end(), entry.name) !=
            bundle.kept.end()) {
          has_member = true;
        }
      }
    }
    if (!has_member) continue;
    dimensions.emplace_back(
        primary.name,
        aggregate(dimension_index(normalized, national.dates, bundle.kept,
                                  bundle.hierarchy, primary.name, weights),
                  Frequency::kAnnual));
  }

  const auto regions = region_indices(panels, bundle.polarities, stats, weights);

  // screening.csv
  CsvTable screening_table;
  screening_table.header = {"indicator", "r", "kept", "reason"};
  for (const auto& row : bundle.screening.rows) {
    screening_table.rows.push_back({row.indicator, format_double(row.r),
                                    row.kept ? "true" : "false",
                                    to_string(row.reason)});
  }
  write_csv_atomic(art.screening, screening_table);

  // weights.csv
  CsvTable weights_table;
  weights_table.header = {"indicator", "weight"};
  for (std::size_t j = 0; j < bundle.kept.size(); ++j) {
    weights_table.rows.push_back(
        {bundle.kept[j], format_double(weights.weights(static_cast<Eigen::Index>(j)))});
  }
  write_csv_atomic(art.weights, weights_table);

  write_csv_atomic(art.index_daily, series_table(daily, "index"));
  write_csv_atomic(art.index_monthly, series_table(monthly, "index"));
  write_csv_atomic(art.index_annual, series_table(annual, "index"));

  // dimensions_annual.csv: period, one column per primary.
  CsvTable dim_table;
  dim_table.header = {"period"};
  for (const auto& [name, series] : dimensions) dim_table.header.push_back(name);
  if (!dimensions.empty()) {
    for (std::size_t i = 0; i < dimensions.front().second.points.size(); ++i) {
      std::vector<std::string> row{dimensions.front().second.points[i].period};
      for (const auto& [name, series] : dimensions) {
        row.push_back(format_double(series.points[i].value));
      }
      dim_table.rows.push_back(std::move(row));
    }
  }
  write_csv_atomic(art.dimensions_annual, dim_table);

  // regions_annual.csv: period, one column per region.
  CsvTable region_table;
  region_table.header = {"period"};
  for (const auto& [name, series] : regions) region_table.header.push_back(name);
  if (!regions.empty()) {
    const auto& first = regions.begin()->second;
    for (std::size_t i = 0; i < first.points.size(); ++i) {
      std::vector<std::string> row{first.points[i].period};
      for (const auto& [name, series] : regions) {
        row.push_back(format_double(series.points[i].value));
      }
      region_table.rows.push_back(std::move(row));
    }
  }
  write_csv_atomic(art.regions_annual, region_table);

  // normalized_monthly.csv: month, one column per kept indicator.
  const MonthlyPanel monthly_panel =
      monthly_means(national.dates, normalized, bundle.kept);
  CsvTable norm_table;
  norm_table.header = {"month"};
  for (const auto& name : bundle.kept) norm_table.header.push_back(name);
  for (std::size_t i = 0; i < monthly_panel.months.size(); ++i) {
    std::vector<std::string> row{format_month(monthly_panel.months[i])};
    for (Eigen::Index j = 0; j < monthly_panel.values.cols(); ++j) {
      row.push_back(format_double(monthly_panel.values(static_cast<Eigen::Index>(i), j)));
    }
    norm_table.rows.push_back(std::move(row));
  }
  write_csv_atomic(art.normalized_monthly, norm_table);

  return {art.screening, art.weights, art.index_daily, art.index_monthly,
          art.index_annual, art.dimensions_annual, art.regions_annual,
          art.normalized_monthly};
}

// ---- stage: analyze ----

MonthlyPanel load_monthly_panel(const fs::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header.empty() || table.header[0] != "month") {
    throw SchemaError(path.string() + ": first column must be 'month'");
  }
  MonthlyPanel panel;
  panel.indicators.assign(table.header.begin() + 1, table.header.end());
  panel.values.resize(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(panel.indicators.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    panel.months.push_back(parse_month(table.rows[r][0]));
    for (std::size_t c = 1; c < table.header.size(); ++c) {
      panel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) =
          parse_double_field(table.rows[r][c], path.string());
    }
  }
  return panel;
}

MonthlySeries load_monthly_series(const fs::path& path) {
  const CsvTable table = read_csv(path);
  MonthlySeries series;
  std::vector<double> values;
  const std::size_t c_period = table.column("period");
  const std::size_t c_index = table.column("index");
  for (const auto& row : table.rows) {
    series.months.push_back(parse_month(row[c_period]));
    values.push_back(parse_double_field(row[c_index], path.string()));
  }
  series.values = Eigen::Map<Eigen::VectorXd>(values.data(),
                                              static_cast<Eigen::Index>(values.size()));
  return series;
}

json screening_csv_to_json(const fs::path& path) {
  const CsvTable table = read_csv(path);
  json rows = json::array();
  const std::size_t c_ind = table.column("indicator");
  const std::size_t c_r = table.column("r");
  const std::size_t c_kept = table.column("kept");
  const std::size_t c_reason = table.column("reason");
  for (const auto& row : table.rows) {
    rows.push_back({{"indicator", row[c_ind]},
                    {"r", parse_double_field(row[c_r], path.string())},
                    {"kept", row[c_kept] == "true"},
                    {"reason", row[c_reason]}});
  }
  return rows;
}

std::vector<fs::path> run_analyze(const RunConfig& cfg) {
  const Artifacts art(cfg.out_dir);
  require_artifact(art.normalized_monthly, "analyze", "build-index");
  require_artifact(art.index_monthly, "analyze", "build-index");
  require_artifact(art.screening, "analyze", "build-index");
  require_artifact(art.expanded_hierarchy, "analyze", "expand");

  const IndicatorHierarchy hierarchy = load_hierarchy_csv(art.expanded_hierarchy);
  const MonthlyPanel panel = load_monthly_panel(art.normalized_monthly);
  const MonthlySeries index_monthly = load_monthly_series(art.index_monthly);
  const MonthlySeries investment = load_investment_csv(cfg.investment_csv);

  const FactorScoreResult factors = group_factor_scores(panel, hierarchy);

  // Regress investment on the factor scores over their common months.
  std::vector<double> y;
  std::vector<std::size_t> month_rows;
  {
    std::map<Month, double> inv_by_month;
    for (std::size_t i = 0; i < investment.months.size(); ++i) {
      inv_by_month[investment.months[i]] = investment.values(static_cast<Eigen::Index>(i));
    }
    for (std::size_t i = 0; i < factors.months.size(); ++i) {
      const auto it = inv_by_month.find(factors.months[i]);
      if (it != inv_by_month.end()) {
        month_rows.push_back(i);
        y.push_back(it->second);
      }
    }
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(month_rows.size()),
                    static_cast<Eigen::Index>(factors.groups.size()));
  for (std::size_t g = 0; g < factors.groups.size(); ++g) {
    for (std::size_t r = 0; r < month_rows.size(); ++r) {
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(g)) =
          factors.groups[g].scores(static_cast<Eigen::Index>(month_rows[r]));
    }
  }
  const Eigen::Map<const Eigen::VectorXd> y_vec(y.data(),
                                                static_cast<Eigen::Index>(y.size()));
  const RegressionReport regression = ols_regress(y_vec, X);
  log_info("analyze: R2 " + format_double(regression.r2) + ", F " +
           format_double(regression.f_stat) + ", p " +
           format_double(regression.p_value));

  const LagProfile lag = lag_correlation(index_monthly, investment, cfg.knobs.max_lag,
                                         cfg.knobs.jan_adjust);
  log_info("analyze: lag profile peaks at " + std::to_string(lag.argmax_lag) +
           " months");

  // factor_scores.csv
  CsvTable score_table;
  score_table.header = {"month"};
  for (const auto& group : factors.groups) score_table.header.push_back(group.primary);
  for (std::size_t i = 0; i < factors.months.size(); ++i) {
    std::vector<std::string> row{format_month(factors.months[i])};
    for (const auto& group : factors.groups) {
      row.push_back(format_double(group.scores(static_cast<Eigen::Index>(i))));
    }
    score_table.rows.push_back(std::move(row));
  }
  write_csv_atomic(art.factor_scores, score_table);

  json analysis;
  analysis["screening"] = screening_csv_to_json(art.screening);
  json factor_json = json::array();
  for (const auto& group : factors.groups) {
    json loadings = json::array();
    for (Eigen::Index i = 0; i < group.loadings.size(); ++i) {
      loadings.push_back(group.loadings(i));
    }
    factor_json.push_back({{"primary", group.primary},
                           {"members", group.members},
                           {"loadings", loadings},
                           {"explained_variance", group.explained_variance}});
  }
  analysis["factors"] = factor_json;
  json coefficients = json::array();
  for (Eigen::Index i = 0; i < regression.coefficients.size(); ++i) {
    coefficients.push_back(regression.coefficients(i));
  }
  analysis["regression"] = {{"coefficients", coefficients},
                            {"intercept", regression.intercept},
                            {"r2", regression.r2},
                            {"adj_r2", regression.adj_r2},
                            {"f_stat", regression.f_stat},
                            {"p_value", regression.p_value},
                            {"n", regression.n},
                            {"k", regression.k}};
  analysis["lag"] = {{"r", lag.r}, {"argmax_lag", lag.argmax_lag}};
  write_file_atomic(art.analysis, analysis.dump(2) + "\n");

  return {art.factor_scores, art.analysis};
}

// ---- stage: report ----

IndexSeries load_daily_series(const fs::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t c_period = table.column("period");
  const std::size_t c_index = table.column("index");
  IndexSeries series;
  series.frequency = Frequency::kDaily;
  for (const auto& row : table.rows) {
    parse_date(row[c_period]);  // validates
    series.points.push_back(
        {row[c_period], parse_double_field(row[c_index], path.string()), false});
  }
  return series;
}

json csv_to_json(const fs::path& path) {
  const CsvTable table = read_csv(path);
  json rows = json::array();
  for (const auto& row : table.rows) {
    json obj = json::object();
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == 0) {
        obj[table.header[c]] = row[c];
      } else {
        obj[table.header[c]] = parse_double_field(row[c], path.string());
      }
    }
    rows.push_back(obj);
  }
  return rows;
}

json series_to_json(const IndexSeries& series) {
  json points = json::array();
  for (const auto& point : series.points) {
    points.push_back({{"period", point.period},
                      {"value", point.value},
                      {"partial", point.partial}});
  }
  return points;
}

std::vector<fs::path> run_report(const RunConfig& cfg) {
  const Artifacts art(cfg.out_dir);
  require_artifact(art.analysis, "report", "analyze");
  require_artifact(art.index_daily, "report", "build-index");
  require_artifact(art.dimensions_annual, "report", "build-index");
  require_artifact(art.regions_annual, "report", "build-index");

  const IndexSeries daily = load_daily_series(art.index_daily);
  json report;
  report["tool"] = kToolName;
  report["version"] = kToolVersion;
  report["seed"] = cfg.rng_seed;
  report["index"] = {{"monthly", series_to_json(aggregate(daily, Frequency::kMonthly))},
                     {"annual", series_to_json(aggregate(daily, Frequency::kAnnual))}};
  report["dimensions_annual"] = csv_to_json(art.dimensions_annual);
  report["regions_annual"] = csv_to_json(art.regions_annual);
  report["analysis"] = json::parse(read_text_file(art.analysis));
  write_file_atomic(art.report, report.dump(2) + "\n");
  return {art.report};
}

// ---- validation ----

void collect(std::vector<std::string>& diagnostics, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    diagnostics.emplace_back(e.what());
  }
}

}  // namespace

std::vector<std::string> validate_inputs(const RunConfig& cfg) {
  std::vector<std::string> diagnostics;
  collect(diagnostics, [&] { load_corpus(cfg.corpus); });
  Lexicon lexicon;
  collect(diagnostics, [&] { lexicon = load_lexicon(cfg.lexicon); });
  collect(diagnostics, [&] { load_word_set(cfg.stopwords); });
  collect(diagnostics, [&] { load_word_set(cfg.availability); });
  collect(diagnostics, [&] { load_word_set(cfg.exclusions); });
  collect(diagnostics, [&] { load_finetune_tsv(cfg.finetune_tsv); });
  collect(diagnostics, [&] { load_hierarchy_csv(cfg.hierarchy_csv); });
  collect(diagnostics, [&] {
    const auto panels = load_raw_panels(cfg.panel_csv);
    bool found = false;
    for (const auto& panel : panels) found = found || panel.region == cfg.national_region;
    if (!found) {
      throw SchemaError(cfg.panel_csv.string() + ": no region '" +
                        cfg.national_region + "'");
    }
  });
  collect(diagnostics, [&] { load_investment_csv(cfg.investment_csv); });

  const auto& k = cfg.knobs;
  if (k.top_k < 1) diagnostics.push_back("pipeline.top_k must be >= 1");
  if (k.screen_threshold < 0.0 || k.screen_threshold > 1.0) {
    diagnostics.push_back("pipeline.screen_threshold must lie in [0, 1]");
  }
  if (k.max_lag < 0) diagnostics.push_back("pipeline.max_lag must be >= 0");
  if (k.mask_rate < 0.0 || k.mask_rate > 1.0) {
    diagnostics.push_back("pipeline.mask_rate must lie in [0, 1]");
  }
  if (k.pretrain_steps < 1) diagnostics.push_back("pipeline.pretrain_steps must be >= 1");
  if (k.pretrain_batch_size < 1) {
    diagnostics.push_back("pipeline.pretrain_batch_size must be >= 1");
  }
  if (k.finetune_batch_size < 1) {
    diagnostics.push_back("pipeline.finetune_batch_size must be >= 1");
  }
  if (k.finetune_epochs < 0) diagnostics.push_back("pipeline.finetune_epochs must be >= 0");
  if (k.learning_rate <= 0.0) diagnostics.push_back("pipeline.learning_rate must be > 0");

  collect(diagnostics, [&] {
    EncoderConfig probe = cfg.encoder;
    probe.vocab_size = Vocabulary::kNumSpecial + 1;  // placeholder for validation
    probe.validate();
  });
  return diagnostics;
}

std::optional<Stage> parse_stage(const std::string& name) {
  if (name == "pretrain") return Stage::kPretrain;
  if (name == "finetune") return Stage::kFinetune;
  if (name == "expand") return Stage::kExpand;
  if (name == "build-index") return Stage::kBuildIndex;
  if (name == "analyze") return Stage::kAnalyze;
  if (name == "report") return Stage::kReport;
  if (name == "all") return Stage::kAll;
  return std::nullopt;
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kPretrain: return "pretrain";
    case Stage::kFinetune: return "finetune";
    case Stage::kExpand: return "expand";
    case Stage::kBuildIndex: return "build-index";
    case Stage::kAnalyze: return "analyze";
    case Stage::kReport: return "report";
    case Stage::kAll: return "all";
  }
  return "all";
}

namespace {

std::vector<fs::path> stage_inputs(Stage stage, const RunConfig& cfg) {
  switch (stage) {
    case Stage::kPretrain: return {cfg.corpus, cfg.lexicon};
    case Stage::kFinetune: return {cfg.lexicon, cfg.finetune_tsv};
    case Stage::kExpand:
      return {cfg.corpus, cfg.lexicon, cfg.stopwords, cfg.hierarchy_csv,
              cfg.availability, cfg.exclusions};
    case Stage::kBuildIndex: return {cfg.panel_csv, cfg.investment_csv};
    case Stage::kAnalyze: return {cfg.investment_csv};
    default: return {};
  }
}

void run_single_stage(Stage stage, const RunConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<fs::path> outputs;
  switch (stage) {
    case Stage::kPretrain: outputs = run_pretrain(cfg); break;
    case Stage::kFinetune: outputs = run_finetune(cfg); break;
    case Stage::kExpand: outputs = run_expand(cfg); break;
    case Stage::kBuildIndex: outputs = run_build_index(cfg); break;
    case Stage::kAnalyze: outputs = run_analyze(cfg); break;
    case Stage::kReport: outputs = run_report(cfg); break;
    case Stage::kAll: break;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  update_manifest(cfg, to_string(stage), stage_inputs(stage, cfg), outputs, elapsed);
  log_info("stage " + to_string(stage) + " finished in " + format_double(elapsed) +
           " s");
}

}  // namespace

void run_stage(Stage stage, const RunConfig& cfg) {
  const auto diagnostics = validate_inputs(cfg);
  if (!diagnostics.empty()) {
    std::string joined = "invalid inputs:";
    for (const auto& d : diagnostics) joined += "\n  - " + d;
    throw SchemaError(joined);
  }
  std::filesystem::create_directories(cfg.out_dir);

  if (stage == Stage::kAll) {
    for (Stage s : {Stage::kPretrain, Stage::kFinetune, Stage::kExpand,
                    Stage::kBuildIndex, Stage::kAnalyze, Stage::kReport}) {
      run_single_stage(s, cfg);
    }
  } else {
    run_single_stage(stage, cfg);
  }
}

int run_cli(const std::string& stage_name, const fs::path& config_path,
            std::optional<int> seed_override,
            std::optional<fs::path> out_override) {
  const auto stage = parse_stage(stage_name);
  if (!stage) {
    log_error("unknown stage '" + stage_name + "'");
    return kExitFailure;
  }
  try {
    RunConfig cfg = load_config(config_path);
    if (seed_override) cfg.rng_seed = *seed_override;
    if (out_override) cfg.out_dir = *out_override;
    run_stage(*stage, cfg);
    return kExitOk;
  } catch (const DependencyError& e) {
    log_error(e.what());
    return kExitDependency;
  } catch (const SchemaError& e) {
    log_error(e.what());
    return kExitSchema;
  } catch (const NumericError& e) {
    log_error(e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    log_error(e.what());
    return kExitFailure;
  }
}

}  // namespace aif
