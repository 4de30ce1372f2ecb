#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aif/encoder.hpp"

namespace aif {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Reads AIF_LOG (error | info | debug; default info) once per process.
void init_logging_from_env();
void set_log_level(LogLevel level);
LogLevel log_level();
void log_error(const std::string& message);
void log_info(const std::string& message);
void log_debug(const std::string& message);

struct PipelineKnobs {
  int top_k = 50;
  double screen_threshold = 0.1;
  int max_lag = 5;
  double mask_rate = 0.15;
  int pretrain_steps = 200;
  int pretrain_batch_size = 8;
  int finetune_batch_size = 16;
  int finetune_epochs = 10;
  double learning_rate = 5e-4;
  bool interpolate_gaps = false;
  bool jan_adjust = true;
};

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path lexicon;
  std::filesystem::path stopwords;
  std::filesystem::path finetune_tsv;
  std::filesystem::path hierarchy_csv;
  std::filesystem::path panel_csv;
  std::filesystem::path investment_csv;
  std::filesystem::path availability;
  std::filesystem::path exclusions;
  std::filesystem::path out_dir;
  std::string national_region = "national";
  EncoderConfig encoder;  // vocab_size resolved at pretrain time
  PipelineKnobs knobs;
  int rng_seed = 0;

  std::filesystem::path config_path;  // where the config was loaded from
};

// JSON config; relative paths resolve against the config file's
// directory. Throws SchemaError on missing or ill-typed fields.
RunConfig load_config(const std::filesystem::path& path);

// Input diagnostics (schema, date order, hierarchy uniqueness, knob
// ranges). Returns messages instead of throwing; empty means valid.
std::vector<std::string> validate_inputs(const RunConfig& config);

enum class Stage { kPretrain, kFinetune, kExpand, kBuildIndex, kAnalyze, kReport, kAll };

std::optional<Stage> parse_stage(const std::string& name);
std::string to_string(Stage stage);

// Exit codes shared by the CLI and the pipeline runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitDependency = 2;
inline constexpr int kExitSchema = 3;
inline constexpr int kExitNumeric = 4;

// Runs one stage (or the whole chain), writing artifacts atomically and
// updating <out_dir>/manifest.json. Throws SchemaError, DependencyError
// or NumericError on failure.
void run_stage(Stage stage, const RunConfig& config);

// CLI entry: loads config, applies overrides, runs the stage and maps
// exceptions onto exit codes.
int run_cli(const std::string& stage_name, const std::filesystem::path& config_path,
            std::optional<int> seed_override,
            std::optional<std::filesystem::path> out_override);

}  // namespace aif
