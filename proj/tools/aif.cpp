// Command line front end. All heavy lifting lives in aif::run_cli so the
// stage logic is testable without spawning a process.

#include <CLI11.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aif/pipeline.hpp"
#include "aif/version.hpp"

int main(int argc, char** argv) {
  aif::init_logging_from_env();

  CLI::App app{"search-volume investment activity index pipeline"};
  app.set_version_flag("--version", aif::kToolVersion);
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"pretrain", "train the encoder on the corpus and write a checkpoint"},
      {"finetune", "fine-tune the pretrained encoder on labeled word/text pairs"},
      {"expand", "expand the indicator hierarchy by embedding similarity"},
      {"build-index", "screen indicators, weight them and build the index series"},
      {"analyze", "factor scores, regression and lag profile for the index"},
      {"report", "bundle index series and analysis into report.json"},
      {"all", "run every stage in order"},
  };

  std::string config;
  int seed = 0;
  std::string out;
  std::string chosen;
  for (const auto& [name, help] : stages) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "override the config's rng_seed");
    sub->add_option("--out", out, "override the config's output directory");
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);

  const CLI::App* sub = app.get_subcommands().front();
  std::optional<int> seed_override;
  if (sub->count("--seed") > 0) seed_override = seed;
  std::optional<std::filesystem::path> out_override;
  if (sub->count("--out") > 0) out_override = out;
  return aif::run_cli(chosen, config, seed_override, out_override);
}
