#include "glam/descriptor_io.hpp"

#include <limits>

#include "byte_io.hpp"
#include "glam/errors.hpp"

namespace glam {

std::vector<std::uint8_t> encode_glds(std::span<const Descriptor> descs) {
  const std::size_t dim = descs.empty() ? 0 : descs.front().vec.size();
  if (descs.size() > std::numeric_limits<std::uint32_t>::max() ||
      dim > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError("GLDS: too many descriptors");
  }
  detail::ByteWriter w;
  w.bytes("GLDS", 4);
  w.u32(static_cast<std::uint32_t>(dim));
  w.u32(static_cast<std::uint32_t>(descs.size()));
  for (const Descriptor& d : descs) {
    if (d.vec.size() != dim) {
      throw ShapeError("GLDS: descriptor '" + d.id + "' has dimension " + std::to_string(d.vec.size()) +
                       ", expected " + std::to_string(dim));
    }
    if (d.id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("GLDS: id longer than 65535 bytes");
    }
    w.u16(static_cast<std::uint16_t>(d.id.size()));
    w.bytes(d.id.data(), d.id.size());
    for (double v : d.vec.values()) w.f32(static_cast<float>(v));
  }
  return std::move(w.buffer());
}

std::vector<Descriptor> decode_glds(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "GLDS");
  r.magic("GLDS");
  const std::uint32_t dim = r.u32("dim");
  const std::uint32_t count = r.u32("count");
  if (count > 0 && dim == 0) r.fail("dim", "dimension must be positive");
  std::vector<Descriptor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string rec = "record[" + std::to_string(i) + "]";
    const std::uint16_t len = r.u16(rec + ".id_length");
    const auto id = r.take(len, rec + ".id");
    Descriptor d;
    d.id.assign(id.begin(), id.end());
    if (r.remaining() / 4 < dim) r.fail(rec + ".values", "truncated input");
    std::vector<double> values(dim);
    for (double& v : values) v = r.f32(rec + ".values");
    d.vec = Tensor({dim}, std::move(values));
    out.push_back(std::move(d));
  }
  if (!r.at_end()) r.fail("trailer", "unexpected trailing bytes");
  return out;
}

void save_glds(const std::filesystem::path& path, std::span<const Descriptor> descs) {
  detail::write_file(path, encode_glds(descs));
}

std::vector<Descriptor> load_glds(const std::filesystem::path& path) {
  return decode_glds(detail::read_file(path));
}

}  // namespace glam
