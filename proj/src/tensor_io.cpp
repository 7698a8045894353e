#include "glam/tensor_io.hpp"

#include <fstream>
#include <iterator>
#include <limits>

#include "byte_io.hpp"

namespace glam {

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

void append_gltn(std::vector<std::uint8_t>& out, const Tensor& tensor) {
  if (tensor.rank() == 0) throw ShapeError("GLTN: cannot encode an empty tensor");
  detail::ByteWriter w;
  w.bytes("GLTN", 4);
  w.u32(static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t e : tensor.shape()) {
    if (e > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("GLTN: extent too large");
    w.u32(static_cast<std::uint32_t>(e));
  }
  for (double v : tensor.values()) w.f32(static_cast<float>(v));
  out.insert(out.end(), w.buffer().begin(), w.buffer().end());
}

Tensor parse_gltn(std::span<const std::uint8_t> bytes, std::size_t base_offset,
                  std::size_t* consumed) {
  detail::ByteReader r(bytes, "GLTN", base_offset);
  r.magic("GLTN");
  const std::uint32_t rank = r.u32("rank");
  if (rank == 0) r.fail("rank", "rank must be positive");
  Shape shape;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::string field = "extent[" + std::to_string(i) + "]";
    const std::uint32_t e = r.u32(field);
    if (e == 0) r.fail(field, "extent must be positive");
    shape.push_back(e);
    count *= e;
    if (count > r.remaining() / 4 + 1) r.fail(field, "extents exceed payload size");
  }
  if (r.remaining() / 4 < count) {
    r.fail("payload", "truncated input, need " + std::to_string(count * 4) + " bytes, have " +
                          std::to_string(r.remaining()));
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = r.f32("payload");
  if (consumed) *consumed = r.offset() - base_offset;
  return Tensor(std::move(shape), std::move(values));
}

void save_gltn(const std::filesystem::path& path, const Tensor& tensor) {
  std::vector<std::uint8_t> bytes;
  append_gltn(bytes, tensor);
  detail::write_file(path, bytes);
}

Tensor load_gltn(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  std::size_t used = 0;
  Tensor t = parse_gltn(bytes, 0, &used);
  if (used != bytes.size()) {
    throw FormatError("GLTN", used, "trailer", "unexpected trailing bytes");
  }
  return t;
}

}  // namespace glam
