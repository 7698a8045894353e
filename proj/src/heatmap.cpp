#include "glam/heatmap.hpp"

#include <algorithm>

#include "glam/errors.hpp"

namespace glam {

Tensor minmax_normalize(const Tensor& map) {
  if (map.empty()) throw ShapeError("heatmap: empty map");
  const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
  const double mn = *lo, mx = *hi;
  Tensor out(map.shape());
  if (mx == mn) {
    out.fill(0.5);
    return out;
  }
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = (map[i] - mn) / (mx - mn);
  return out;
}

Tensor export_heatmap(const AttentionBundle& bundle, HeatmapKind kind) {
  if (kind == HeatmapKind::local) {
    const Tensor& a = bundle.local_spatial;
    if (a.rank() != 3) throw ShapeError("heatmap: bundle has no local spatial attention map");
    return minmax_normalize(a.reshaped({a.extent(1), a.extent(2)}));
  }
  const Tensor& a = bundle.global_spatial;
  const Tensor& f = bundle.fused;
  if (a.rank() != 2 || f.rank() != 3) {
    throw ShapeError("heatmap: bundle has no global spatial attention map");
  }
  const std::size_t h = f.extent(1), w = f.extent(2), n = h * w;
  if (a.extent(0) != n) throw ShapeError("heatmap: attention map does not match feature size");
  Tensor received({h, w});
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0.0;
    for (std::size_t q = 0; q < n; ++q) s += a[p * n + q];
    received[p] = s / static_cast<double>(n);
  }
  return minmax_normalize(received);
}

}  // namespace glam
