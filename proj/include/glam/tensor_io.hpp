#pragma once

// GLTN tensor files: "GLTN", u32 rank, rank x u32 extents, then float32
// payload in row-major order. All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "glam/tensor.hpp"

namespace glam {

/// Appends one GLTN block to `out`. Values are narrowed to float32.
void append_gltn(std::vector<std::uint8_t>& out, const Tensor& tensor);

/// Parses one GLTN block starting at `bytes[0]`. `base_offset` is only used
/// for diagnostics; `consumed` receives the block length.
Tensor parse_gltn(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0,
                  std::size_t* consumed = nullptr);

void save_gltn(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_gltn(const std::filesystem::path& path);

}  // namespace glam
