#pragma once

// Subcommand implementations behind the `glam` executable. Each returns a
// process exit status and reports problems on stderr.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "glam/model.hpp"

namespace glam {

struct CliConfig {
  std::string command;
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path gt;
  std::filesystem::path config;
  std::filesystem::path checkpoint;
  std::string protocol = "medium";
  std::vector<double> scales = kDefaultScales;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string kind = "both";  // heatmap: local | global | both
  double tolerance = 1e-4;    // gradcheck
};

int cmd_gradcheck(const CliConfig& config);
/// PPM file or directory of .ppm files -> GLDS, records sorted by id.
int cmd_extract(const CliConfig& config);
/// GLDS + ground truth -> text report on stdout, JSON report to --output.
int cmd_eval(const CliConfig& config);
/// Trains on the synthetic blob set; writes model.ckpt (+ manifest) and loss.csv into --output.
int cmd_train_toy(const CliConfig& config);
/// PPM file or directory -> <id>_local.pgm / <id>_global.pgm in --output.
int cmd_heatmap(const CliConfig& config);
/// Writes the synthetic retrieval split as PPM files plus gt.json into --output.
int cmd_synth(const CliConfig& config);

int run_command(const CliConfig& config);

/// Model from --checkpoint, or a fresh default model seeded by --seed.
GlamModel load_or_init_model(const CliConfig& config);

}  // namespace glam
