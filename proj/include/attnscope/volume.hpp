#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace attnscope {

struct Shape3 {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return frames * height * width; }
  std::size_t frame_size() const noexcept { return height * width; }
  bool operator==(const Shape3&) const = default;
};

/// Dense [frames][height][width] volume, frame-major then row-major.
/// Used both for latent attention rows and for upsampled output volumes.
struct Volume {
  Shape3 shape;
  std::vector<double> values;

  Volume() = default;
  explicit Volume(Shape3 s, double fill = 0.0) : shape(s), values(s.size(), fill) {}
  Volume(Shape3 s, std::vector<double> v) : shape(s), values(std::move(v)) {}

  double& at(std::size_t f, std::size_t y, std::size_t x) noexcept {
    return values[(f * shape.height + y) * shape.width + x];
  }
  double at(std::size_t f, std::size_t y, std::size_t x) const noexcept {
    return values[(f * shape.height + y) * shape.width + x];
  }
  std::span<const double> frame(std::size_t f) const noexcept {
    return {values.data() + f * shape.frame_size(), shape.frame_size()};
  }
  std::span<double> frame(std::size_t f) noexcept {
    return {values.data() + f * shape.frame_size(), shape.frame_size()};
  }

  bool operator==(const Volume&) const = default;
};

/// One token's attention over the latent video grid.
using LatentVolume = Volume;

}  // namespace attnscope
