#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "glam/errors.hpp"
#include "simd/kernels_internal.hpp"

namespace glam::simd {
namespace {

const KernelTable* table_or_null(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return &detail::scalar_table;
    case Isa::avx2:
#if defined(GLAM_HAVE_AVX2)
      if (__builtin_cpu_supports("avx2")) return &detail::avx2_table;
#endif
      return nullptr;
    case Isa::neon:
#if defined(GLAM_HAVE_NEON)
      return &detail::neon_table;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("GLAM_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &detail::scalar_table;
    if (want == "avx2" && table_or_null(Isa::avx2)) return table_or_null(Isa::avx2);
    if (want == "neon" && table_or_null(Isa::neon)) return table_or_null(Isa::neon);
  }
  if (auto* t = table_or_null(Isa::avx2)) return t;
  if (auto* t = table_or_null(Isa::neon)) return t;
  return &detail::scalar_table;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{pick_default()};
  return current;
}

void check_same(std::size_t a, std::size_t b) {
  if (a != b) throw ShapeError("simd kernel: length mismatch " + std::to_string(a) + " vs " +
                               std::to_string(b));
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept { return table_or_null(isa) != nullptr; }

const KernelTable& kernels_for(Isa isa) {
  if (auto* t = table_or_null(isa)) return *t;
  throw std::invalid_argument("SIMD variant not available: " + std::string(isa_name(isa)));
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void select(Isa isa) { slot().store(&kernels_for(isa), std::memory_order_relaxed); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same(x.size(), y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void mul(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check_same(a.size(), b.size());
  check_same(a.size(), out.size());
  active().mul(a.data(), b.data(), out.data(), a.size());
}

void add(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check_same(a.size(), b.size());
  check_same(a.size(), out.size());
  active().add(a.data(), b.data(), out.data(), a.size());
}

void scale(double alpha, std::span<const double> x, std::span<double> out) {
  check_same(x.size(), out.size());
  active().scale(alpha, x.data(), out.data(), x.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

}  // namespace glam::simd
