#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "attnscope/attention_store.hpp"
#include "attnscope/volume.hpp"

namespace attnscope {

enum class Axis { steps, blocks, heads };

std::string_view to_string(Axis axis) noexcept;
/// Accepts "steps"/"blocks"/"heads" (and the singular forms).
Axis parse_axis(std::string_view text);
std::size_t axis_extent(const Dims& dims, Axis axis) noexcept;

/// How one of the step/block/head axes is resolved.
struct AxisSel {
  enum class Kind { single, all, mean };
  Kind kind = Kind::mean;
  std::size_t index = 0;

  static AxisSel single(std::size_t i) noexcept { return {Kind::single, i}; }
  static AxisSel all() noexcept { return {Kind::all, 0}; }
  static AxisSel mean() noexcept { return {Kind::mean, 0}; }

  bool operator==(const AxisSel&) const = default;
};

/// Parses "mean", "all", "first", "middle", "last" or a zero-based index.
/// Aliases resolve against `extent`: middle is (extent - 1) / 2.
/// Malformed text throws ParameterError; an index >= extent throws BoundsError.
AxisSel parse_axis_sel(std::string_view text, std::size_t extent);
std::string to_string(const AxisSel& sel);

struct Selection {
  std::size_t token = 0;
  AxisSel steps = AxisSel::mean();
  AxisSel blocks = AxisSel::mean();
  AxisSel heads = AxisSel::mean();

  AxisSel& on(Axis axis) noexcept;
  const AxisSel& on(Axis axis) const noexcept;
  bool operator==(const Selection&) const = default;
};

std::string to_string(const Selection& sel);

/// Throws BoundsError/ParameterError if `sel` does not fit the store's dims.
void check_selection(const Dims& dims, const Selection& sel);

/// Materializes a selection. With no "all" axis the result holds one volume;
/// with one "all" axis it holds one volume per index along that axis. "mean"
/// axes are arithmetic means accumulated in double. More than one "all" axis
/// is a ParameterError.
std::vector<LatentVolume> resolve(const AttentionStore& store, const Selection& sel);

/// resolve() for selections without an "all" axis.
LatentVolume resolve_one(const AttentionStore& store, const Selection& sel);

/// Looks a token up by exact text among non-special tokens. Throws
/// ParameterError when the text is missing or ambiguous (listing candidates).
std::size_t find_token(const DumpHeader& header, std::string_view text);

}  // namespace attnscope
