#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "attnscope/image.hpp"

namespace attnscope {

struct Colormap {
  std::string name;
  std::array<Rgb, 256> lut{};
};

/// Parses the asset format: exactly 256 lines of "r g b" decimal bytes.
Colormap parse_colormap(std::string_view name, std::string_view text);
Colormap load_colormap_file(const std::filesystem::path& path);

/// Names of the colormaps compiled into the binary ("inferno" is the default).
std::vector<std::string> builtin_colormap_names();
inline constexpr std::string_view kDefaultColormap = "inferno";

/// Looks up a builtin by name, else treats `name_or_path` as an asset file.
Colormap get_colormap(std::string_view name_or_path);

}  // namespace attnscope
