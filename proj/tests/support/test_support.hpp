#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "attnscope/dump_file.hpp"
#include "attnscope/dump_header.hpp"

namespace attnscope::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("attnscope_test_" + std::to_string(rd()) + "_" + std::to_string(++counter));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline DumpHeader toy_header(std::size_t steps, std::size_t blocks, std::size_t heads, std::size_t tokens,
                             std::size_t lf, std::size_t lh, std::size_t lw, DType dtype = DType::f32,
                             bool softmax = false) {
  DumpHeader h;
  h.model_id = "toy";
  h.prompt = "toy prompt";
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < tokens; ++i) texts.push_back("tok" + std::to_string(i));
  h.tokens = make_tokens(texts, {});
  h.dims = {steps, blocks, heads, tokens, lf, lh, lw};
  h.output_shape = {lf * 2 + 1, lh * 2 + 1, lw * 2 + 1};
  h.dtype = dtype;
  h.softmax_applied = softmax;
  h.generation.seed = 7;
  h.generation.guidance_scale = 1.0;
  return h;
}

/// The value stored at (s, b, h, t, pos) by write_formula_dump.
inline float formula_value(std::size_t s, std::size_t b, std::size_t h, std::size_t t, std::size_t pos) {
  return static_cast<float>((s + b + h + t + pos) % 7);
}

/// Dump whose every element is formula_value(...), exact in f16 and f32.
inline void write_formula_dump(const std::filesystem::path& path, const DumpHeader& header) {
  const auto& d = header.dims;
  write_dump(path, header, [&](std::size_t s, std::size_t b, std::span<std::byte> out) {
    std::vector<float> values;
    for (std::size_t h = 0; h < d.heads; ++h)
      for (std::size_t t = 0; t < d.tokens; ++t)
        for (std::size_t p = 0; p < d.positions(); ++p) values.push_back(formula_value(s, b, h, t, p));
    encode_values(header.dtype, values, out);
  });
}

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Independent binary16 quantizer: rounds to 11 significant bits (ties to even)
/// using frexp/nearbyint only, with the subnormal step fixed at 2^-24.
inline double quantize_f16(double x) {
  if (x == 0.0) return 0.0;
  int e = 0;
  std::frexp(std::abs(x), &e);  // |x| = m 2^e, m in [0.5, 1)
  const int exponent = std::max(e - 1, -14);
  const double ulp = std::ldexp(1.0, exponent - 10);
  return std::nearbyint(x / ulp) * ulp;
}

}  // namespace attnscope::testing
