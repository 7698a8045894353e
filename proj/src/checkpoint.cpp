#include "glam/checkpoint.hpp"

#include <map>

#include "byte_io.hpp"
#include "glam/errors.hpp"
#include "glam/tensor_io.hpp"
#include "json.hpp"

namespace glam {

using nlohmann::json;

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".json";
}

namespace {

json config_json(const ModelConfig& c) {
  return {{"backbone_widths", c.backbone_widths}, {"kernel_size", c.kernel_size},
          {"dim", c.dim},                         {"classes", c.classes},
          {"use_local", c.use_local},             {"use_global", c.use_global},
          {"dropout_rate", c.dropout_rate},       {"gem_p", c.gem_p},
          {"margin", c.margin},                   {"scale", c.scale}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  j.at("backbone_widths").get_to(c.backbone_widths);
  j.at("kernel_size").get_to(c.kernel_size);
  j.at("dim").get_to(c.dim);
  j.at("classes").get_to(c.classes);
  j.at("use_local").get_to(c.use_local);
  j.at("use_global").get_to(c.use_global);
  j.at("dropout_rate").get_to(c.dropout_rate);
  j.at("gem_p").get_to(c.gem_p);
  j.at("margin").get_to(c.margin);
  j.at("scale").get_to(c.scale);
  return c;
}

// Every stored tensor in a fixed order: learnable parameters, then the
// batch-norm running statistics.
template <class Fn>
void visit_state(GlamModel& model, Fn&& fn) {
  model.visit([&](const std::string& name, Var& v) { fn(name, v.mutable_value()); });
  fn(std::string("head.bn.running_mean"), model.head.running_mean);
  fn(std::string("head.bn.running_var"), model.head.running_var);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, GlamModel& model) {
  std::vector<std::uint8_t> bytes;
  json tensors = json::array();
  visit_state(model, [&](const std::string& name, Tensor& t) {
    const std::size_t offset = bytes.size();
    append_gltn(bytes, t);
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset},
                       {"length", bytes.size() - offset}});
  });
  const json manifest{{"format", "glam-checkpoint"},
                      {"version", 1},
                      {"config", config_json(model.config)},
                      {"tensors", tensors}};
  detail::write_file(path, bytes);
  const std::string text = manifest.dump(2) + "\n";
  detail::write_file(manifest_path(path),
                     {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

GlamModel load_checkpoint(const std::filesystem::path& path) {
  const auto manifest_bytes = detail::read_file(manifest_path(path));
  json manifest;
  try {
    manifest = json::parse(manifest_bytes.begin(), manifest_bytes.end());
  } catch (const json::parse_error& e) {
    throw FormatError("checkpoint manifest", e.byte, "json", e.what());
  }
  ModelConfig config;
  std::map<std::string, std::pair<Shape, std::size_t>> entries;
  try {
    if (manifest.at("format") != "glam-checkpoint") {
      throw FormatError("checkpoint manifest", 0, "format", "not a glam checkpoint");
    }
    config = config_from_json(manifest.at("config"));
    for (const json& t : manifest.at("tensors")) {
      entries[t.at("name").get<std::string>()] = {t.at("shape").get<Shape>(),
                                                  t.at("offset").get<std::size_t>()};
    }
  } catch (const json::exception& e) {
    throw FormatError("checkpoint manifest", 0, "config", e.what());
  }

  const auto bytes = detail::read_file(path);
  GlamModel model = GlamModel::init(config, 0);
  visit_state(model, [&](const std::string& name, Tensor& target) {
    const auto it = entries.find(name);
    if (it == entries.end()) throw FormatError("checkpoint manifest", 0, name, "missing tensor");
    const auto& [shape, offset] = it->second;
    if (offset >= bytes.size()) throw FormatError("checkpoint", offset, name, "offset past end of file");
    Tensor t = parse_gltn(std::span(bytes).subspan(offset), offset);
    if (t.shape() != target.shape() || shape != target.shape()) {
      throw FormatError("checkpoint", offset, name,
                        "shape " + shape_string(t.shape()) + " does not match model shape " +
                            shape_string(target.shape()));
    }
    target = std::move(t);
  });
  return model;
}

}  // namespace glam
