#include "attnscope/focus_stats.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "attnscope/error.hpp"

namespace attnscope {

namespace {

double checked_mass(const Volume& v, const char* op) {
  double sum = 0.0;
  for (double x : v.values) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw ParameterError(std::string(op) + ": volume must be finite and non-negative");
    }
    sum += x;
  }
  if (!(sum > 0.0)) throw ParameterError(std::string(op) + ": volume has zero mass");
  return sum;
}

}  // namespace

double entropy(const Volume& v) {
  const double sum = checked_mass(v, "entropy");
  double h = 0.0;
  for (double x : v.values) {
    if (x > 0.0) {
      const double p = x / sum;
      h -= p * std::log(p);
    }
  }
  return h;
}

Vec3 center_of_mass(const Volume& v) {
  const double sum = checked_mass(v, "center_of_mass");
  double f_acc = 0.0, y_acc = 0.0, x_acc = 0.0;
  for (std::size_t f = 0; f < v.shape.frames; ++f) {
    for (std::size_t y = 0; y < v.shape.height; ++y) {
      for (std::size_t x = 0; x < v.shape.width; ++x) {
        const double w = v.at(f, y, x);
        f_acc += w * static_cast<double>(f);
        y_acc += w * static_cast<double>(y);
        x_acc += w * static_cast<double>(x);
      }
    }
  }
  return {f_acc / sum, y_acc / sum, x_acc / sum};
}

double peak(const Volume& v) {
  const double sum = checked_mass(v, "peak");
  double mx = 0.0;
  for (double x : v.values) mx = std::max(mx, x);
  return mx / sum;
}

std::string_view to_string(Metric metric) noexcept {
  switch (metric) {
    case Metric::entropy:
      return "entropy";
    case Metric::peak:
      return "peak";
    case Metric::center_of_mass:
      return "center_of_mass";
  }
  return "?";
}

Metric parse_metric(std::string_view text) {
  if (text == "entropy") return Metric::entropy;
  if (text == "peak") return Metric::peak;
  if (text == "center_of_mass" || text == "com") return Metric::center_of_mass;
  throw ParameterError("unknown metric '" + std::string(text) +
                       "'; valid metrics: entropy, peak, center_of_mass");
}

StatsSeries stats_series(const AttentionStore& store, const Selection& fixed, Metric metric, Axis axis) {
  Selection sel = fixed;
  sel.on(axis) = AxisSel::all();
  StatsSeries series;
  series.metric = metric;
  series.axis = axis;
  series.token = sel.token;
  const auto volumes = resolve(store, sel);
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    StatsPoint p;
    p.index = i;
    switch (metric) {
      case Metric::entropy:
        p.value = entropy(volumes[i]);
        break;
      case Metric::peak:
        p.value = peak(volumes[i]);
        break;
      case Metric::center_of_mass:
        p.com = center_of_mass(volumes[i]);
        break;
    }
    series.points.push_back(p);
  }
  return series;
}

std::string StatsSeries::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  if (metric == Metric::center_of_mass) {
    os << "axis_index,f,y,x\n";
    for (const auto& p : points) os << p.index << "," << p.com[0] << "," << p.com[1] << "," << p.com[2] << "\n";
  } else {
    os << "axis_index,value\n";
    for (const auto& p : points) os << p.index << "," << p.value << "\n";
  }
  return os.str();
}

nlohmann::json StatsSeries::to_json() const {
  nlohmann::json j;
  j["metric"] = to_string(metric);
  j["axis"] = to_string(axis);
  j["token"] = token;
  auto& pts = j["points"] = nlohmann::json::array();
  for (const auto& p : points) {
    if (metric == Metric::center_of_mass) {
      pts.push_back({{"axis_index", p.index}, {"value", {p.com[0], p.com[1], p.com[2]}}});
    } else {
      pts.push_back({{"axis_index", p.index}, {"value", p.value}});
    }
  }
  return j;
}

}  // namespace attnscope
