#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace attnscope {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB image, row-major, three bytes per pixel.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, Rgb fill = {0, 0, 0});

  Rgb get(std::size_t x, std::size_t y) const noexcept {
    const auto* p = &pixels[3 * (y * width + x)];
    return {p[0], p[1], p[2]};
  }
  void set(std::size_t x, std::size_t y, Rgb c) noexcept {
    auto* p = &pixels[3 * (y * width + x)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  bool operator==(const RgbImage&) const = default;
};

/// Copies the w x h region whose top-left corner is (x, y).
RgbImage crop(const RgbImage& img, std::size_t x, std::size_t y, std::size_t w, std::size_t h);

/// 8-bit RGB PNG, no alpha, fixed compression settings (same bytes every run).
std::vector<std::uint8_t> encode_png(const RgbImage& img);
/// Decodes any PNG libpng understands, converted to 8-bit RGB.
RgbImage decode_png(std::span<const std::uint8_t> bytes);
RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& img);

}  // namespace attnscope
