#pragma once

#include "glam/attention.hpp"

namespace glam {

enum class HeatmapKind { local, global };

/// [h,w] map in [0,1]. Local: min-max normalized A_s^l. Global: attention
/// received per location (row means of A_s^g), min-max normalized. A
/// constant map becomes all 0.5.
Tensor export_heatmap(const AttentionBundle& bundle, HeatmapKind kind);

/// Min-max normalization with the constant-map convention above.
Tensor minmax_normalize(const Tensor& map);

}  // namespace glam
