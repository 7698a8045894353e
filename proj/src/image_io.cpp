#include "glam/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "byte_io.hpp"
#include "glam/errors.hpp"

namespace glam {

namespace {

struct NetpbmHeader {
  std::size_t width = 0, height = 0, maxval = 0;
};

// Parses "Px <w> <h> <maxval>" with '#' comments, consuming the single
// whitespace byte that precedes the raster.
NetpbmHeader read_header(detail::ByteReader& r, std::string_view magic) {
  r.magic(magic);
  auto number = [&](const char* field) {
    for (;;) {
      if (r.at_end()) r.fail(field, "unexpected end of header");
      const std::size_t here = r.offset();
      const std::uint8_t c = r.take(1, field)[0];
      if (c == '#') {
        while (!r.at_end() && r.take(1, field)[0] != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) continue;
      if (!std::isdigit(c)) throw FormatError(std::string(magic), here, field, "expected a decimal number");
      std::size_t v = c - '0';
      for (;;) {
        if (r.at_end()) r.fail(field, "unexpected end of header");
        const std::uint8_t d = r.take(1, field)[0];
        if (std::isdigit(d)) {
          v = v * 10 + (d - '0');
          if (v > 1u << 24) throw FormatError(std::string(magic), here, field, "value too large");
          continue;
        }
        if (!std::isspace(d)) r.fail(field, "expected whitespace after number");
        return v;
      }
    }
  };
  NetpbmHeader h;
  h.width = number("width");
  h.height = number("height");
  h.maxval = number("maxval");
  return h;
}

void check_header(const detail::ByteReader& r, const NetpbmHeader& h) {
  if (h.width == 0) r.fail("width", "width must be positive");
  if (h.height == 0) r.fail("height", "height must be positive");
  if (h.maxval == 0 || h.maxval > 255) r.fail("maxval", "only 8-bit samples (maxval 1..255) are supported");
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_header(detail::ByteWriter& w, const char* magic, std::size_t width, std::size_t height) {
  const std::string header = std::string(magic) + "\n" + std::to_string(width) + " " +
                             std::to_string(height) + "\n255\n";
  w.bytes(header.data(), header.size());
}

}  // namespace

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "PPM");
  const NetpbmHeader h = read_header(r, "P6");
  check_header(r, h);
  const auto raster = r.take(h.width * h.height * 3, "raster");
  Tensor out({3, h.height, h.width});
  const double maxval = static_cast<double>(h.maxval);
  const std::size_t plane = h.width * h.height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::uint8_t s = raster[i * 3 + c];
      if (s > h.maxval) r.fail("raster", "sample exceeds maxval");
      out[c * plane + i] = s / maxval;
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_ppm(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.extent(0) != 3) throw ShapeError("PPM: expected [3,h,w]");
  const std::size_t hgt = rgb.extent(1), wid = rgb.extent(2), plane = hgt * wid;
  detail::ByteWriter w;
  write_header(w, "P6", wid, hgt);
  std::vector<std::uint8_t> raster(plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) raster[i * 3 + c] = quantize(rgb[c * plane + i]);
  }
  w.bytes(raster.data(), raster.size());
  return std::move(w.buffer());
}

Tensor normalize_rgb(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.extent(0) != 3) throw ShapeError("normalize_rgb: expected [3,h,w]");
  Tensor out = rgb;
  const std::size_t plane = rgb.extent(1) * rgb.extent(2);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      out[c * plane + i] = (rgb[c * plane + i] - kImageMean[c]) / kImageStd[c];
    }
  }
  return out;
}

Tensor load_image(const std::filesystem::path& path) {
  return normalize_rgb(decode_ppm(detail::read_file(path)));
}

void save_ppm(const std::filesystem::path& path, const Tensor& rgb) {
  detail::write_file(path, encode_ppm(rgb));
}

std::vector<std::uint8_t> encode_pgm(const Tensor& gray) {
  if (gray.rank() != 2) throw ShapeError("PGM: expected [h,w]");
  detail::ByteWriter w;
  write_header(w, "P5", gray.extent(1), gray.extent(0));
  std::vector<std::uint8_t> raster(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) raster[i] = quantize(gray[i]);
  w.bytes(raster.data(), raster.size());
  return std::move(w.buffer());
}

Tensor decode_pgm(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "PGM");
  const NetpbmHeader h = read_header(r, "P5");
  check_header(r, h);
  const auto raster = r.take(h.width * h.height, "raster");
  Tensor out({h.height, h.width});
  for (std::size_t i = 0; i < raster.size(); ++i) {
    out[i] = raster[i] / static_cast<double>(h.maxval);
  }
  return out;
}

void save_pgm(const std::filesystem::path& path, const Tensor& gray) {
  detail::write_file(path, encode_pgm(gray));
}

}  // namespace glam
