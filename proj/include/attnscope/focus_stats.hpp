#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "attnscope/selection.hpp"
#include "attnscope/synth.hpp"
#include "attnscope/volume.hpp"

namespace attnscope {

// Focus metrics. Inputs must be non-negative with positive mass; they are
// renormalized to a probability distribution internally.

/// Shannon entropy in nats, with 0 ln 0 = 0.
double entropy(const Volume& v);

/// Probability-weighted mean (frame, y, x) in voxel coordinates.
Vec3 center_of_mass(const Volume& v);

/// Largest probability mass held by a single voxel.
double peak(const Volume& v);

enum class Metric { entropy, peak, center_of_mass };

std::string_view to_string(Metric metric) noexcept;
/// Throws ParameterError listing the valid names.
Metric parse_metric(std::string_view text);

struct StatsPoint {
  std::size_t index = 0;
  double value = 0.0;  // entropy / peak
  Vec3 com{};          // center_of_mass
};

struct StatsSeries {
  Metric metric = Metric::entropy;
  Axis axis = Axis::steps;
  std::size_t token = 0;
  std::vector<StatsPoint> points;

  /// "axis_index,value" or, for center_of_mass, "axis_index,f,y,x".
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Evaluates `metric` for every index along `axis`. The other two axes are
/// resolved from `fixed` (single or mean); its entry for `axis` is ignored.
StatsSeries stats_series(const AttentionStore& store, const Selection& fixed, Metric metric, Axis axis);

}  // namespace attnscope
