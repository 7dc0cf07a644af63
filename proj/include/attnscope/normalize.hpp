#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnscope/volume.hpp"

namespace attnscope {

/// How the display range [lo, hi] is chosen before mapping to [0, 1].
struct NormMode {
  enum class Kind { global_minmax, per_frame_minmax, percentile, fixed };
  Kind kind = Kind::percentile;
  double lo = 1.0;   // percentile rank or fixed value
  double hi = 99.0;

  static NormMode global_minmax() noexcept { return {Kind::global_minmax, 0, 0}; }
  static NormMode per_frame_minmax() noexcept { return {Kind::per_frame_minmax, 0, 0}; }
  static NormMode percentile(double lo, double hi) noexcept { return {Kind::percentile, lo, hi}; }
  static NormMode fixed(double lo, double hi) noexcept { return {Kind::fixed, lo, hi}; }

  bool operator==(const NormMode&) const = default;
};

/// "global", "per_frame", "percentile:LO:HI", "fixed:LO:HI"; bare "percentile"
/// means percentile:1:99. Throws ParameterError on malformed text or lo >= hi.
NormMode parse_norm_mode(std::string_view text);
std::string to_string(const NormMode& mode);

struct DisplayRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Linear-interpolated percentile (rank p in [0, 100]) over `values`.
/// `values` is used as scratch and reordered.
double percentile_inplace(std::span<double> values, double p);

/// Reference range over all values. per_frame_minmax is not a single range and
/// is rejected here; use normalize_display for it.
DisplayRange compute_range(std::span<const double> values, const NormMode& mode);

/// Affine map of [lo, hi] onto [0, 1], clamped. A range narrower than 1e-12
/// maps everything to 0.
void apply_range(std::span<const double> in, DisplayRange range, std::span<double> out);

/// Normalizes a whole volume to [0, 1] under `mode`.
Volume normalize_display(const Volume& v, const NormMode& mode);

}  // namespace attnscope
