#include "attnscope/image.hpp"

#include <png.h>

#include <fstream>
#include <iterator>

#include "attnscope/error.hpp"

namespace attnscope {

RgbImage::RgbImage(std::size_t w, std::size_t h, Rgb fill) : width(w), height(h), pixels(3 * w * h) {
  for (std::size_t i = 0; i < w * h; ++i) {
    pixels[3 * i] = fill[0];
    pixels[3 * i + 1] = fill[1];
    pixels[3 * i + 2] = fill[2];
  }
}

RgbImage crop(const RgbImage& img, std::size_t x, std::size_t y, std::size_t w, std::size_t h) {
  if (x + w > img.width || y + h > img.height) throw BoundsError("crop region exceeds image");
  RgbImage out(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    const auto* src = &img.pixels[3 * ((y + r) * img.width + x)];
    std::copy(src, src + 3 * w, &out.pixels[3 * r * w]);
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  if (img.width == 0 || img.height == 0) throw ParameterError("cannot encode an empty image");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("png decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out(image.width, image.height);
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(std::string("png decode failed: ") + image.message);
  }
  return out;
}

RgbImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace attnscope
