#pragma once

// Binary PPM (P6) input and PGM (P5) output.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "glam/tensor.hpp"

namespace glam {

inline constexpr std::array<double, 3> kImageMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImageStd = {0.229, 0.224, 0.225};

/// Decodes a P6 file into [3,h,w] with values in [0,1] (sample / maxval).
Tensor decode_ppm(std::span<const std::uint8_t> bytes);
/// Encodes [3,h,w] values in [0,1] as an 8-bit P6 file.
std::vector<std::uint8_t> encode_ppm(const Tensor& rgb);

/// Per-channel (v - mean) / std.
Tensor normalize_rgb(const Tensor& rgb);

/// Reads a P6 file and applies normalize_rgb.
Tensor load_image(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const Tensor& rgb);

/// Encodes [h,w] values in [0,1] as 8-bit P5 with round(255 v).
std::vector<std::uint8_t> encode_pgm(const Tensor& gray);
Tensor decode_pgm(std::span<const std::uint8_t> bytes);
void save_pgm(const std::filesystem::path& path, const Tensor& gray);

}  // namespace glam
