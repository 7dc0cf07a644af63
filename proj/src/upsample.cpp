#include "attnscope/upsample.hpp"

#include <algorithm>
#include <cmath>

#include "attnscope/error.hpp"

namespace attnscope {

std::string_view to_string(GridMapping mapping) noexcept {
  return mapping == GridMapping::endpoint_aligned ? "endpoint" : "centered";
}

GridMapping parse_grid_mapping(std::string_view text) {
  if (text == "endpoint" || text == "endpoint_aligned") return GridMapping::endpoint_aligned;
  if (text == "centered" || text == "cell_centered") return GridMapping::cell_centered;
  throw ParameterError("unknown grid mapping '" + std::string(text) + "' (endpoint or centered)");
}

double source_coordinate(std::size_t i, std::size_t in, std::size_t out, GridMapping mapping) {
  const double n_in = static_cast<double>(in);
  if (mapping == GridMapping::endpoint_aligned) {
    if (out <= 1) return (n_in - 1.0) / 2.0;
    return static_cast<double>(i) * (n_in - 1.0) / static_cast<double>(out - 1);
  }
  const double c = (static_cast<double>(i) + 0.5) * n_in / static_cast<double>(out) - 0.5;
  return std::clamp(c, 0.0, n_in - 1.0);
}

std::vector<AxisTap> axis_taps(std::size_t in, std::size_t out, GridMapping mapping) {
  std::vector<AxisTap> taps(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double c = source_coordinate(i, in, out, mapping);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(c)), in - 1);
    taps[i] = {lo, std::min(lo + 1, in - 1), c - static_cast<double>(lo)};
  }
  return taps;
}

namespace {

// a + w (b - a) keeps a == b exact; the clamp guards the last-ulp overshoot.
inline double lerp_bounded(double a, double b, double w) noexcept {
  const double r = a + w * (b - a);
  return std::clamp(r, std::min(a, b), std::max(a, b));
}

void check_target(const Shape3& src, const Shape3& dst) {
  if (src.size() == 0) throw ParameterError("cannot upsample an empty volume");
  if (dst.frames < src.frames || dst.height < src.height || dst.width < src.width) {
    throw ParameterError("upsample target " + std::to_string(dst.frames) + "x" +
                         std::to_string(dst.height) + "x" + std::to_string(dst.width) +
                         " is smaller than source " + std::to_string(src.frames) + "x" +
                         std::to_string(src.height) + "x" + std::to_string(src.width) +
                         " (downsampling is not supported)");
  }
}

struct Stencils {
  std::vector<AxisTap> t, y, x;
};

Stencils make_stencils(const Shape3& src, const Shape3& dst, GridMapping mapping) {
  return {axis_taps(src.frames, dst.frames, mapping), axis_taps(src.height, dst.height, mapping),
          axis_taps(src.width, dst.width, mapping)};
}

// Interpolates output frame `f` into `out` (dst.height * dst.width).
void frame_kernel(const Volume& v, const Shape3& dst, const Stencils& st, std::size_t f,
                  std::vector<double>& plane, std::vector<double>& rows, std::span<double> out) {
  const auto& src = v.shape;
  const auto tt = st.t[f];
  const auto a = v.frame(tt.lo);
  const auto b = v.frame(tt.hi);
  for (std::size_t i = 0; i < src.frame_size(); ++i) plane[i] = lerp_bounded(a[i], b[i], tt.weight);
  for (std::size_t y = 0; y < dst.height; ++y) {
    const auto ty = st.y[y];
    const double* r0 = &plane[ty.lo * src.width];
    const double* r1 = &plane[ty.hi * src.width];
    double* row = &rows[y * src.width];
    for (std::size_t x = 0; x < src.width; ++x) row[x] = lerp_bounded(r0[x], r1[x], ty.weight);
  }
  for (std::size_t y = 0; y < dst.height; ++y) {
    const double* row = &rows[y * src.width];
    double* o = &out[y * dst.width];
    for (std::size_t x = 0; x < dst.width; ++x) {
      const auto tx = st.x[x];
      o[x] = lerp_bounded(row[tx.lo], row[tx.hi], tx.weight);
    }
  }
}

}  // namespace

Volume upsample_trilinear(const Volume& v, const Shape3& target, GridMapping mapping) {
  check_target(v.shape, target);
  const auto st = make_stencils(v.shape, target, mapping);
  Volume out(target);
  std::vector<double> plane(v.shape.frame_size());
  std::vector<double> rows(target.height * v.shape.width);
  for (std::size_t f = 0; f < target.frames; ++f) {
    frame_kernel(v, target, st, f, plane, rows, out.frame(f));
  }
  return out;
}

std::vector<double> upsample_frame(const Volume& v, const Shape3& target, std::size_t frame,
                                   GridMapping mapping) {
  check_target(v.shape, target);
  if (frame >= target.frames) {
    throw ParameterError("frame " + std::to_string(frame) + " out of range [0, " +
                         std::to_string(target.frames) + ")");
  }
  const auto st = make_stencils(v.shape, target, mapping);
  std::vector<double> out(target.frame_size());
  std::vector<double> plane(v.shape.frame_size());
  std::vector<double> rows(target.height * v.shape.width);
  frame_kernel(v, target, st, frame, plane, rows, out);
  return out;
}

}  // namespace attnscope
