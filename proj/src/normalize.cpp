#include "attnscope/normalize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "attnscope/error.hpp"

namespace attnscope {

namespace {

constexpr double kMinRange = 1e-12;

double parse_number(std::string_view text, std::string_view whole) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw ParameterError("bad number '" + std::string(text) + "' in normalization '" +
                         std::string(whole) + "'");
  }
  return v;
}

void check_bounds(const NormMode& m) {
  if (m.kind != NormMode::Kind::percentile && m.kind != NormMode::Kind::fixed) return;
  if (!(m.lo < m.hi)) {
    std::ostringstream os;
    os << "normalization requires lo < hi, got lo=" << m.lo << " hi=" << m.hi;
    throw ParameterError(os.str());
  }
  if (m.kind == NormMode::Kind::percentile && (m.lo < 0.0 || m.hi > 100.0)) {
    throw ParameterError("percentile ranks must lie in [0, 100]");
  }
}

}  // namespace

NormMode parse_norm_mode(std::string_view text) {
  if (text == "global" || text == "global_minmax") return NormMode::global_minmax();
  if (text == "per_frame" || text == "per_frame_minmax") return NormMode::per_frame_minmax();
  if (text == "percentile") return NormMode::percentile(1.0, 99.0);
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string_view::npos || text.find(':', c2 + 1) != std::string_view::npos) {
    throw ParameterError("unknown normalization '" + std::string(text) +
                         "' (global, per_frame, percentile:LO:HI, fixed:LO:HI)");
  }
  const auto name = text.substr(0, c1);
  const double lo = parse_number(text.substr(c1 + 1, c2 - c1 - 1), text);
  const double hi = parse_number(text.substr(c2 + 1), text);
  NormMode m;
  if (name == "percentile") {
    m = NormMode::percentile(lo, hi);
  } else if (name == "fixed") {
    m = NormMode::fixed(lo, hi);
  } else {
    throw ParameterError("unknown normalization '" + std::string(text) + "'");
  }
  check_bounds(m);
  return m;
}

std::string to_string(const NormMode& m) {
  switch (m.kind) {
    case NormMode::Kind::global_minmax:
      return "global";
    case NormMode::Kind::per_frame_minmax:
      return "per_frame";
    case NormMode::Kind::percentile:
    case NormMode::Kind::fixed: {
      std::ostringstream os;
      os.precision(17);
      os << (m.kind == NormMode::Kind::percentile ? "percentile:" : "fixed:") << m.lo << ":" << m.hi;
      return os.str();
    }
  }
  return "?";
}

double percentile_inplace(std::span<double> values, double p) {
  if (values.empty()) throw ParameterError("percentile of an empty set");
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto k = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(k);
  auto kth = values.begin() + static_cast<std::ptrdiff_t>(k);
  std::nth_element(values.begin(), kth, values.end());
  const double a = *kth;
  if (frac == 0.0 || k + 1 >= values.size()) return a;
  const double b = *std::min_element(kth + 1, values.end());
  return a + frac * (b - a);
}

DisplayRange compute_range(std::span<const double> values, const NormMode& mode) {
  check_bounds(mode);
  switch (mode.kind) {
    case NormMode::Kind::fixed:
      return {mode.lo, mode.hi};
    case NormMode::Kind::global_minmax: {
      if (values.empty()) return {0.0, 0.0};
      const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
      return {*mn, *mx};
    }
    case NormMode::Kind::percentile: {
      if (values.empty()) return {0.0, 0.0};
      std::vector<double> scratch(values.begin(), values.end());
      const double lo = percentile_inplace(scratch, mode.lo);
      const double hi = percentile_inplace(scratch, mode.hi);
      return {lo, hi};
    }
    case NormMode::Kind::per_frame_minmax:
      break;
  }
  throw ParameterError("per_frame normalization has no single reference range");
}

void apply_range(std::span<const double> in, DisplayRange range, std::span<double> out) {
  const double span = range.hi - range.lo;
  if (!(span >= kMinRange)) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::clamp((in[i] - range.lo) / span, 0.0, 1.0);
  }
}

Volume normalize_display(const Volume& v, const NormMode& mode) {
  for (double x : v.values) {
    if (!std::isfinite(x)) throw ParameterError("normalize_display: volume has non-finite values");
  }
  Volume out(v.shape);
  if (mode.kind == NormMode::Kind::per_frame_minmax) {
    for (std::size_t f = 0; f < v.shape.frames; ++f) {
      apply_range(v.frame(f), compute_range(v.frame(f), NormMode::global_minmax()), out.frame(f));
    }
    return out;
  }
  apply_range(v.values, compute_range(v.values, mode), out.values);
  return out;
}

}  // namespace attnscope
