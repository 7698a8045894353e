#pragma once

// Runtime-dispatched inner loops. Every variant of an element-wise kernel
// rounds exactly like the scalar reference (no FMA contraction), so switching
// ISA never changes results of conv/matmul/broadcast code built on them. Only
// `dot` reorders its summation and is compared with a tolerance.

#include <cstddef>
#include <span>
#include <string_view>

namespace glam::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  /// out[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  /// out[i] = alpha * x[i]
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
};

std::string_view isa_name(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;

/// Table for a specific ISA; throws std::invalid_argument when unsupported.
const KernelTable& kernels_for(Isa isa);

/// Active table. Chosen once from the CPU, overridable with GLAM_SIMD=scalar|avx2|neon.
const KernelTable& active();

/// Forces the active table (tests, benchmarks). Not meant to race with compute.
void select(Isa isa);

// Span front-ends over the active table.
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void mul(std::span<const double> a, std::span<const double> b, std::span<double> out);
void add(std::span<const double> a, std::span<const double> b, std::span<double> out);
void scale(double alpha, std::span<const double> x, std::span<double> out);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace glam::simd
