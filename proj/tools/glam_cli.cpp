#include <iostream>

#include "CLI11.hpp"
#include "glam/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Global-local attention descriptors: extraction, evaluation and toy training"};
  app.require_subcommand(1);
  glam::CliConfig cfg;
  std::uint64_t seed = 0;

  auto seed_flag = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed")->check(CLI::NonNegativeNumber);
  };
  auto checkpoint_flag = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", cfg.checkpoint, "Model checkpoint (default: fresh model from --seed)");
  };

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck->add_option("--output", cfg.output, "JSON report path");
  gradcheck->add_option("--tolerance", cfg.tolerance, "Maximum relative error");
  seed_flag(gradcheck);

  CLI::App* extract = app.add_subcommand("extract", "Multi-resolution descriptors for PPM images");
  extract->add_option("--input", cfg.input, "PPM file or directory")->required();
  extract->add_option("--output", cfg.output, "GLDS output path")->required();
  extract->add_option("--scales", cfg.scales, "Comma-separated image scales")->delimiter(',');
  extract->add_option("--threads", cfg.threads, "Worker threads");
  checkpoint_flag(extract);
  seed_flag(extract);

  CLI::App* eval = app.add_subcommand("eval", "mAP and mP@10 of a descriptor file");
  eval->add_option("--input", cfg.input, "GLDS descriptor file")->required();
  eval->add_option("--gt", cfg.gt, "Ground-truth JSON")->required();
  eval->add_option("--protocol", cfg.protocol, "medium or hard")
      ->check(CLI::IsMember({"medium", "hard"}));
  eval->add_option("--output", cfg.output, "JSON report path");

  CLI::App* train = app.add_subcommand("train-toy", "Train on the synthetic blob dataset");
  train->add_option("--config", cfg.config, "Training JSON");
  train->add_option("--output", cfg.output, "Output directory")->required();
  seed_flag(train);

  CLI::App* heatmap = app.add_subcommand("heatmap", "Spatial attention maps as PGM images");
  heatmap->add_option("--input", cfg.input, "PPM file or directory")->required();
  heatmap->add_option("--output", cfg.output, "Output directory")->required();
  heatmap->add_option("--kind", cfg.kind, "local, global or both")
      ->check(CLI::IsMember({"local", "global", "both"}));
  checkpoint_flag(heatmap);
  seed_flag(heatmap);

  CLI::App* synth = app.add_subcommand("synth", "Write the synthetic retrieval split");
  synth->add_option("--output", cfg.output, "Output directory")->required();
  seed_flag(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  for (CLI::App* sub : app.get_subcommands()) {
    const CLI::Option* opt = sub->get_option_no_throw("--seed");
    if (opt && opt->count() > 0) cfg.seed = seed;
  }
  return glam::run_command(cfg);
}
