#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace attnscope {

enum class DType { f16, f32 };
enum class CfgBranch { cond, uncond };

std::size_t element_size(DType dtype) noexcept;
std::string_view to_string(DType dtype) noexcept;
std::string_view to_string(CfgBranch branch) noexcept;

struct TokenEntry {
  std::size_t index = 0;
  std::string text;
  bool is_special = false;

  bool operator==(const TokenEntry&) const = default;
};

/// Axis counts of the stored 5-D tensor [steps][blocks][heads][tokens][positions]
/// plus the latent grid that the position axis flattens.
struct Dims {
  std::size_t steps = 0;
  std::size_t blocks = 0;
  std::size_t heads = 0;
  std::size_t tokens = 0;
  std::size_t latent_frames = 0;
  std::size_t latent_h = 0;
  std::size_t latent_w = 0;

  std::size_t positions() const noexcept { return latent_frames * latent_h * latent_w; }
  bool operator==(const Dims&) const = default;
};

struct OutputShape {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  bool operator==(const OutputShape&) const = default;
};

struct GenerationInfo {
  std::int64_t seed = 0;
  double guidance_scale = 1.0;
  std::optional<std::string> scheduler_name;

  bool operator==(const GenerationInfo&) const = default;
};

struct DumpHeader {
  int version = 1;
  std::string model_id;
  std::string prompt;
  std::optional<std::string> negative_prompt;
  std::vector<TokenEntry> tokens;
  Dims dims;
  OutputShape output_shape;
  DType dtype = DType::f16;
  bool softmax_applied = true;
  CfgBranch cfg_branch = CfgBranch::cond;
  GenerationInfo generation;
  // Keys written by other producers (e.g. the extractor's Q/K convention
  // note). Preserved verbatim so a header survives a read/write cycle.
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const DumpHeader&) const = default;

  std::size_t element_bytes() const noexcept { return element_size(dtype); }
  /// Bytes of one (step, block) chunk: heads x tokens x positions elements.
  std::size_t chunk_bytes() const noexcept;
  std::size_t chunk_count() const noexcept { return dims.steps * dims.blocks; }
  /// Bytes of one (head, token) row inside a chunk.
  std::size_t row_bytes() const noexcept { return dims.positions() * element_bytes(); }
};

/// Throws FormatError naming the first violated invariant.
void check_header(const DumpHeader& header);

nlohmann::json header_to_json(const DumpHeader& header);
/// Parses and invariant-checks; throws FormatError on any problem.
DumpHeader header_from_json(const nlohmann::json& j);

/// Token list for a header: one entry per text, special flags given by predicate.
std::vector<TokenEntry> make_tokens(const std::vector<std::string>& texts,
                                    const std::vector<bool>& is_special);

}  // namespace attnscope
