#pragma once

// Checkpoints: concatenated GLTN blocks at `path`, plus a JSON manifest at
// `path + ".json"` giving the model configuration and each block's name,
// shape and byte offset. Values are stored as float32.

#include <filesystem>

#include "glam/model.hpp"

namespace glam {

void save_checkpoint(const std::filesystem::path& path, GlamModel& model);
GlamModel load_checkpoint(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);

}  // namespace glam
