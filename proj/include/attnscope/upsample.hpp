#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "attnscope/volume.hpp"

namespace attnscope {

/// Output-to-source coordinate mapping used by the interpolator.
enum class GridMapping {
  // src = i * (in - 1) / (out - 1); out == 1 samples the center (in - 1) / 2.
  // Latent corners land exactly on output corners.
  endpoint_aligned,
  // src = (i + 0.5) * in / out - 0.5, clamped to [0, in - 1].
  cell_centered,
};

std::string_view to_string(GridMapping mapping) noexcept;
GridMapping parse_grid_mapping(std::string_view text);

/// Linear interpolation stencil for one output index along one axis.
struct AxisTap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double weight = 0.0;  // weight of `hi`
};

double source_coordinate(std::size_t i, std::size_t in, std::size_t out, GridMapping mapping);
std::vector<AxisTap> axis_taps(std::size_t in, std::size_t out, GridMapping mapping);

/// Separable linear interpolation in t, y, x. Target must be >= source on
/// every axis (ParameterError otherwise). Each output is a convex combination
/// of inputs, so constants are preserved exactly and bounds are never exceeded.
Volume upsample_trilinear(const Volume& v, const Shape3& target,
                          GridMapping mapping = GridMapping::endpoint_aligned);

/// A single output frame of upsample_trilinear(v, target), computed without
/// materializing the other frames. Bit-identical to the corresponding slice.
std::vector<double> upsample_frame(const Volume& v, const Shape3& target, std::size_t frame,
                                   GridMapping mapping = GridMapping::endpoint_aligned);

}  // namespace attnscope
