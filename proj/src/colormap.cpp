#include "attnscope/colormap.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "attnscope/error.hpp"

namespace attnscope {

// Generated from assets/colormaps/*.txt at configure time.
const std::map<std::string, std::string_view>& builtin_colormap_assets();

Colormap parse_colormap(std::string_view name, std::string_view text) {
  Colormap cm;
  cm.name = std::string(name);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (n >= 256) throw ParameterError("colormap '" + cm.name + "' has more than 256 entries");
    std::istringstream fields(line);
    int r = -1, g = -1, b = -1;
    std::string trailing;
    if (!(fields >> r >> g >> b) || (fields >> trailing) || r < 0 || r > 255 || g < 0 || g > 255 ||
        b < 0 || b > 255) {
      throw ParameterError("colormap '" + cm.name + "' line " + std::to_string(n + 1) +
                           ": expected three bytes 'r g b'");
    }
    cm.lut[n++] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
  }
  if (n != 256) {
    throw ParameterError("colormap '" + cm.name + "' has " + std::to_string(n) + " entries, expected 256");
  }
  return cm;
}

Colormap load_colormap_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read colormap " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_colormap(path.stem().string(), ss.str());
}

std::vector<std::string> builtin_colormap_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : builtin_colormap_assets()) names.push_back(name);
  return names;
}

Colormap get_colormap(std::string_view name_or_path) {
  const auto& assets = builtin_colormap_assets();
  if (auto it = assets.find(std::string(name_or_path)); it != assets.end()) {
    return parse_colormap(it->first, it->second);
  }
  if (std::filesystem::exists(name_or_path)) return load_colormap_file(name_or_path);
  std::string msg = "unknown colormap '" + std::string(name_or_path) + "'; builtins:";
  for (const auto& [name, _] : assets) msg += " " + name;
  throw ParameterError(msg);
}

}  // namespace attnscope
