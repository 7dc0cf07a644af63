#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attnscope/dump_header.hpp"
#include "attnscope/volume.hpp"

namespace attnscope {

using Vec3 = std::array<double, 3>;  // (frame, y, x) in latent voxel units

/// Per-step blob center and sigma for one token. A single entry is broadcast
/// over all steps.
struct BlobTrack {
  std::vector<Vec3> centers;
  std::vector<double> sigmas;

  Vec3 center_at(std::size_t step) const;
  double sigma_at(std::size_t step) const;
};

/// Track that moves linearly from `from` to `to` while sigma goes linearly
/// from `sigma_from` to `sigma_to` over `steps` steps.
BlobTrack linear_track(const Vec3& from, const Vec3& to, double sigma_from, double sigma_to,
                       std::size_t steps);

struct SynthSpec {
  DumpHeader header;              // dims, tokens, output shape, dtype, metadata
  std::vector<BlobTrack> tracks;  // one per token
  double noise = 0.0;             // amplitude of U(0,1) noise added before renormalizing
  std::uint64_t seed = 0;
};

/// Flat parameter set used by the CLI and the acceptance suite.
struct SynthParams {
  std::size_t steps = 4;
  std::size_t blocks = 3;
  std::size_t heads = 2;
  std::vector<std::string> token_texts{"a", "cat", "</s>", "<pad>"};
  Shape3 latent{3, 6, 8};
  std::size_t out_frames = 13;
  std::size_t out_height = 48;
  std::size_t out_width = 64;
  DType dtype = DType::f16;
  double sigma_start = 4.0;
  double sigma_end = 1.0;
  bool moving = true;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string model_id = "synthetic";
  std::string prompt = "a cat";
  std::optional<std::string> negative_prompt;
  double guidance_scale = 1.0;
};

/// Text tokens such as "<pad>" or "</s>" are flagged special.
bool looks_special(const std::string& token_text);

SynthSpec make_synth_spec(const SynthParams& params);

/// Canonical configuration: 25 steps, 30 blocks, 12 heads, seed 58, guidance
/// 6, 61x480x832 output, with the token count and latent grid reduced to
/// 8 tokens over 4x15x26 so it fits on a laptop.
SynthParams canonical_synth_params();

/// Writes a dump whose rows are Gaussian blobs plus uniform noise,
/// renormalized to sum 1. Byte-identical output for identical specs.
void synth_dump(const std::filesystem::path& path, const SynthSpec& spec);

/// The unnormalized blob over the latent grid, frame-major. Exposed for tests.
std::vector<double> gaussian_blob(std::size_t frames, std::size_t height, std::size_t width,
                                  const Vec3& center, double sigma);

}  // namespace attnscope
