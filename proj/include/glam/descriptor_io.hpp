#pragma once

// GLDS descriptor files: "GLDS", u32 dim, u32 count, then per record a u16
// id length, the id bytes, and dim float32 values. Little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "glam/retrieval.hpp"

namespace glam {

std::vector<std::uint8_t> encode_glds(std::span<const Descriptor> descs);
std::vector<Descriptor> decode_glds(std::span<const std::uint8_t> bytes);

void save_glds(const std::filesystem::path& path, std::span<const Descriptor> descs);
std::vector<Descriptor> load_glds(const std::filesystem::path& path);

}  // namespace glam
