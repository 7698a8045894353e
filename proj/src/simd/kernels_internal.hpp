#pragma once

#include "glam/simd.hpp"

namespace glam::simd::detail {

extern const KernelTable scalar_table;
#if defined(GLAM_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(GLAM_HAVE_NEON)
extern const KernelTable neon_table;
#endif

}  // namespace glam::simd::detail
