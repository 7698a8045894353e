#include "glam/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "byte_io.hpp"
#include "glam/checkpoint.hpp"
#include "glam/descriptor_io.hpp"
#include "glam/errors.hpp"
#include "glam/gradcheck.hpp"
#include "glam/heatmap.hpp"
#include "glam/image_io.hpp"
#include "glam/retrieval.hpp"
#include "glam/synthetic.hpp"
#include "glam/training.hpp"

namespace fs = std::filesystem;

namespace glam {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const char* flag) {
  if (p.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::is_regular_file(p)) throw UsageError(std::string(flag) + ": no such file " + p.string());
}

void require_output_dir(const fs::path& p) {
  if (p.empty()) throw UsageError("--output is required");
  if (fs::exists(p) && !fs::is_directory(p)) throw UsageError("--output must be a directory: " + p.string());
  fs::create_directories(p);
}

void require_output_parent(const fs::path& p) {
  if (p.empty()) throw UsageError("--output is required");
  const fs::path parent = p.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw UsageError("--output: directory does not exist: " + parent.string());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  detail::write_file(p, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

struct ImageFile {
  std::string id;
  fs::path path;
};

// A single .ppm file or every .ppm file in a directory, sorted by id.
std::vector<ImageFile> list_images(const fs::path& input) {
  if (input.empty()) throw UsageError("--input is required");
  std::vector<ImageFile> out;
  if (fs::is_regular_file(input)) {
    out.push_back({input.stem().string(), input});
  } else if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input)) {
      if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
        out.push_back({entry.path().stem().string(), entry.path()});
      }
    }
    if (out.empty()) throw UsageError("--input: no .ppm files in " + input.string());
  } else {
    throw UsageError("--input: no such file or directory " + input.string());
  }
  std::sort(out.begin(), out.end(), [](const ImageFile& a, const ImageFile& b) { return a.id < b.id; });
  return out;
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Prefixes format diagnostics with the offending file.
template <class Fn>
auto reading(const fs::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const FormatError& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::uint64_t seed_or_zero(const CliConfig& c) { return c.seed.value_or(0); }

}  // namespace

GlamModel load_or_init_model(const CliConfig& config) {
  if (!config.checkpoint.empty()) {
    require_file(config.checkpoint, "--checkpoint");
    require_file(manifest_path(config.checkpoint), "--checkpoint manifest");
    return load_checkpoint(config.checkpoint);
  }
  return GlamModel::init(ModelConfig{}, seed_or_zero(config));
}

int cmd_gradcheck(const CliConfig& config) {
  if (!(config.tolerance >= 0.0)) throw UsageError("--tolerance must be non-negative");
  if (!config.output.empty()) require_output_parent(config.output);
  const std::vector<GradReport> reports = check_all(config.tolerance, seed_or_zero(config));
  std::cout << gradcheck_table(reports);
  if (!config.output.empty()) write_text(config.output, gradcheck_json(reports) + "\n");
  const bool ok = std::all_of(reports.begin(), reports.end(), [](const GradReport& r) { return r.pass; });
  return ok ? 0 : 1;
}

int cmd_extract(const CliConfig& config) {
  const std::vector<ImageFile> files = list_images(config.input);
  require_output_parent(config.output);
  if (config.scales.empty()) throw UsageError("--scales must not be empty");
  for (double s : config.scales) {
    if (!(s > 0.0)) throw UsageError("--scales entries must be positive");
  }
  if (config.threads == 0) throw UsageError("--threads must be at least 1");
  const GlamModel model = load_or_init_model(config);
  std::vector<Descriptor> descs(files.size());
  parallel_for(files.size(), config.threads, [&](std::size_t i) {
    const Tensor image = reading(files[i].path, [&] { return load_image(files[i].path); });
    descs[i] = {files[i].id, multi_resolution_descriptor(image, model, config.scales)};
  });
  save_glds(config.output, descs);
  std::cerr << "wrote " << descs.size() << " descriptors to " << config.output.string() << "\n";
  return 0;
}

int cmd_eval(const CliConfig& config) {
  require_file(config.input, "--input");
  require_file(config.gt, "--gt");
  if (!config.output.empty()) require_output_parent(config.output);
  const Protocol protocol = parse_protocol(config.protocol);
  const std::vector<Descriptor> descs = reading(config.input, [&] { return load_glds(config.input); });
  const RetrievalGroundTruth gt = reading(config.gt, [&] { return load_ground_truth(config.gt); });
  const ProtocolReport report = map_protocol(descs, gt, protocol);
  std::cout << report_text(report);
  if (!config.output.empty()) write_text(config.output, report_json(report) + "\n");
  return 0;
}

int cmd_train_toy(const CliConfig& config) {
  TrainConfig tc;
  if (!config.config.empty()) {
    require_file(config.config, "--config");
    tc = reading(config.config, [&] { return load_train_config(config.config); });
  }
  if (config.seed) tc.seed = *config.seed;
  require_output_dir(config.output);
  SyntheticConfig sc;
  sc.seed = tc.seed;
  const std::vector<SyntheticImage> images = make_blob_images(sc);
  const std::vector<LabeledImage> dataset = to_labeled(images);
  TrainResult result = train_toy(dataset, tc);

  const fs::path ckpt = config.output / "model.ckpt";
  save_checkpoint(ckpt, result.model);
  std::string csv = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < result.losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, result.losses[i]);
    csv += buf;
  }
  write_text(config.output / "loss.csv", csv);
  if (!result.losses.empty()) {
    std::fprintf(stderr, "loss %.4f -> %.4f over %zu steps\n", result.losses.front(),
                 result.losses.back(), result.losses.size());
  }
  return 0;
}

int cmd_heatmap(const CliConfig& config) {
  const std::vector<ImageFile> files = list_images(config.input);
  if (config.kind != "local" && config.kind != "global" && config.kind != "both") {
    throw UsageError("--kind must be local, global or both");
  }
  require_output_dir(config.output);
  const GlamModel model = load_or_init_model(config);
  std::vector<HeatmapKind> kinds;
  if (config.kind != "global") {
    if (!model.config.use_local) throw UsageError("the model has no local attention branch");
    kinds.push_back(HeatmapKind::local);
  }
  if (config.kind != "local") {
    if (!model.config.use_global) throw UsageError("the model has no global attention branch");
    kinds.push_back(HeatmapKind::global);
  }
  for (const ImageFile& f : files) {
    AttentionBundle bundle;
    describe(reading(f.path, [&] { return load_image(f.path); }), model, &bundle);
    for (HeatmapKind k : kinds) {
      const char* suffix = k == HeatmapKind::local ? "_local.pgm" : "_global.pgm";
      save_pgm(config.output / (f.id + suffix), export_heatmap(bundle, k));
    }
  }
  return 0;
}

int cmd_synth(const CliConfig& config) {
  require_output_dir(config.output);
  SyntheticConfig sc;
  sc.seed = seed_or_zero(config);
  const RetrievalSplit split = make_retrieval_split(sc);
  const fs::path images = config.output / "images";
  fs::create_directories(images);
  for (const auto* list : {&split.queries, &split.database}) {
    for (const SyntheticImage& img : *list) save_ppm(images / (img.meta.id + ".ppm"), img.rgb);
  }
  write_text(config.output / "gt.json", ground_truth_json(split.gt) + "\n");
  return 0;
}

int run_command(const CliConfig& config) {
  try {
    if (config.command == "gradcheck") return cmd_gradcheck(config);
    if (config.command == "extract") return cmd_extract(config);
    if (config.command == "eval") return cmd_eval(config);
    if (config.command == "train-toy") return cmd_train_toy(config);
    if (config.command == "heatmap") return cmd_heatmap(config);
    if (config.command == "synth") return cmd_synth(config);
    std::cerr << "error: unknown subcommand '" << config.command << "'\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace glam
