#include "attnscope/selection.hpp"

#include <charconv>
#include <sstream>

#include "attnscope/error.hpp"

namespace attnscope {

std::string_view to_string(Axis axis) noexcept {
  switch (axis) {
    case Axis::steps:
      return "steps";
    case Axis::blocks:
      return "blocks";
    case Axis::heads:
      return "heads";
  }
  return "?";
}

Axis parse_axis(std::string_view text) {
  if (text == "steps" || text == "step") return Axis::steps;
  if (text == "blocks" || text == "block") return Axis::blocks;
  if (text == "heads" || text == "head") return Axis::heads;
  throw ParameterError("unknown axis '" + std::string(text) + "' (expected steps, blocks or heads)");
}

std::size_t axis_extent(const Dims& dims, Axis axis) noexcept {
  switch (axis) {
    case Axis::steps:
      return dims.steps;
    case Axis::blocks:
      return dims.blocks;
    case Axis::heads:
      return dims.heads;
  }
  return 0;
}

AxisSel parse_axis_sel(std::string_view text, std::size_t extent) {
  if (text == "mean") return AxisSel::mean();
  if (text == "all") return AxisSel::all();
  if (extent == 0) throw BoundsError("axis is empty");
  if (text == "first") return AxisSel::single(0);
  if (text == "middle") return AxisSel::single((extent - 1) / 2);
  if (text == "last") return AxisSel::single(extent - 1);
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ParameterError("expected an index, mean, all, first, middle or last; got '" +
                         std::string(text) + "'");
  }
  if (value >= extent) {
    throw BoundsError("index " + std::to_string(value) + " out of range [0, " +
                      std::to_string(extent) + ")");
  }
  return AxisSel::single(value);
}

std::string to_string(const AxisSel& sel) {
  switch (sel.kind) {
    case AxisSel::Kind::single:
      return std::to_string(sel.index);
    case AxisSel::Kind::all:
      return "all";
    case AxisSel::Kind::mean:
      return "mean";
  }
  return "?";
}

AxisSel& Selection::on(Axis axis) noexcept {
  return axis == Axis::steps ? steps : axis == Axis::blocks ? blocks : heads;
}

const AxisSel& Selection::on(Axis axis) const noexcept {
  return axis == Axis::steps ? steps : axis == Axis::blocks ? blocks : heads;
}

std::string to_string(const Selection& sel) {
  return "token=" + std::to_string(sel.token) + " step=" + to_string(sel.steps) +
         " block=" + to_string(sel.blocks) + " head=" + to_string(sel.heads);
}

void check_selection(const Dims& dims, const Selection& sel) {
  if (sel.token >= dims.tokens) {
    throw BoundsError("token " + std::to_string(sel.token) + " out of range [0, " +
                      std::to_string(dims.tokens) + ")");
  }
  int all_axes = 0;
  for (Axis axis : {Axis::steps, Axis::blocks, Axis::heads}) {
    const auto& a = sel.on(axis);
    if (a.kind == AxisSel::Kind::all) ++all_axes;
    if (a.kind == AxisSel::Kind::single && a.index >= axis_extent(dims, axis)) {
      throw BoundsError(std::string(to_string(axis)) + " index " + std::to_string(a.index) +
                        " out of range [0, " + std::to_string(axis_extent(dims, axis)) + ")");
    }
  }
  if (all_axes > 1) {
    throw ParameterError("at most one of steps/blocks/heads may be 'all' (" + to_string(sel) + ")");
  }
}

namespace {

struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
};

Range index_range(const AxisSel& a, std::size_t extent) {
  if (a.kind == AxisSel::Kind::single) return {a.index, a.index + 1};
  return {0, extent};
}

LatentVolume materialize(const AttentionStore& store, std::size_t token, Range s, Range b, Range h) {
  const std::size_t count = (s.end - s.begin) * (b.end - b.begin) * (h.end - h.begin);
  if (count == 1) return store.get_map(token, s.begin, b.begin, h.begin);
  LatentVolume acc(store.latent_shape());
  for (std::size_t step = s.begin; step < s.end; ++step) {
    for (std::size_t block = b.begin; block < b.end; ++block) {
      for (std::size_t head = h.begin; head < h.end; ++head) {
        store.accumulate_map(token, step, block, head, acc.values);
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& v : acc.values) v *= inv;
  return acc;
}

}  // namespace

std::vector<LatentVolume> resolve(const AttentionStore& store, const Selection& sel) {
  const auto& d = store.header().dims;
  check_selection(d, sel);
  const Range s = index_range(sel.steps, d.steps);
  const Range b = index_range(sel.blocks, d.blocks);
  const Range h = index_range(sel.heads, d.heads);

  std::vector<LatentVolume> out;
  auto single = [](std::size_t i) { return Range{i, i + 1}; };
  if (sel.steps.kind == AxisSel::Kind::all) {
    for (std::size_t i = 0; i < d.steps; ++i) out.push_back(materialize(store, sel.token, single(i), b, h));
  } else if (sel.blocks.kind == AxisSel::Kind::all) {
    for (std::size_t i = 0; i < d.blocks; ++i) out.push_back(materialize(store, sel.token, s, single(i), h));
  } else if (sel.heads.kind == AxisSel::Kind::all) {
    for (std::size_t i = 0; i < d.heads; ++i) out.push_back(materialize(store, sel.token, s, b, single(i)));
  } else {
    out.push_back(materialize(store, sel.token, s, b, h));
  }
  return out;
}

LatentVolume resolve_one(const AttentionStore& store, const Selection& sel) {
  for (Axis axis : {Axis::steps, Axis::blocks, Axis::heads}) {
    if (sel.on(axis).kind == AxisSel::Kind::all) {
      throw ParameterError("selection resolves to a sequence, expected a single volume (" +
                           to_string(sel) + ")");
    }
  }
  return std::move(resolve(store, sel).front());
}

std::size_t find_token(const DumpHeader& header, std::string_view text) {
  std::vector<std::size_t> hits;
  for (const auto& t : header.tokens) {
    if (!t.is_special && t.text == text) hits.push_back(t.index);
  }
  if (hits.size() == 1) return hits.front();
  std::ostringstream os;
  if (hits.empty()) {
    os << "token '" << text << "' not found among non-special tokens; available:";
    for (const auto& t : header.tokens) {
      if (!t.is_special) os << " [" << t.index << "]'" << t.text << "'";
    }
  } else {
    os << "token '" << text << "' is ambiguous; candidates at indices:";
    for (auto i : hits) os << " " << i;
    os << " (use --token-index)";
  }
  throw ParameterError(os.str());
}

}  // namespace attnscope
