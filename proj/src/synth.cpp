#include "attnscope/synth.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "attnscope/dump_file.hpp"
#include "attnscope/error.hpp"

namespace attnscope {

Vec3 BlobTrack::center_at(std::size_t step) const {
  if (centers.empty()) throw ParameterError("blob track has no centers");
  return centers.size() == 1 ? centers.front() : centers.at(step);
}

double BlobTrack::sigma_at(std::size_t step) const {
  if (sigmas.empty()) throw ParameterError("blob track has no sigmas");
  return sigmas.size() == 1 ? sigmas.front() : sigmas.at(step);
}

BlobTrack linear_track(const Vec3& from, const Vec3& to, double sigma_from, double sigma_to,
                       std::size_t steps) {
  BlobTrack t;
  for (std::size_t s = 0; s < steps; ++s) {
    const double a = steps > 1 ? static_cast<double>(s) / static_cast<double>(steps - 1) : 0.0;
    t.centers.push_back({from[0] + a * (to[0] - from[0]), from[1] + a * (to[1] - from[1]),
                         from[2] + a * (to[2] - from[2])});
    t.sigmas.push_back(sigma_from + a * (sigma_to - sigma_from));
  }
  return t;
}

bool looks_special(const std::string& text) {
  return text.size() >= 2 && text.front() == '<' && text.back() == '>';
}

SynthSpec make_synth_spec(const SynthParams& p) {
  SynthSpec spec;
  auto& h = spec.header;
  h.model_id = p.model_id;
  h.prompt = p.prompt;
  h.negative_prompt = p.negative_prompt;
  std::vector<bool> special;
  for (const auto& t : p.token_texts) special.push_back(looks_special(t));
  h.tokens = make_tokens(p.token_texts, special);
  h.dims = {p.steps, p.blocks, p.heads, p.token_texts.size(), p.latent.frames, p.latent.height,
            p.latent.width};
  h.output_shape = {p.out_frames, p.out_height, p.out_width};
  h.dtype = p.dtype;
  h.softmax_applied = true;
  h.cfg_branch = CfgBranch::cond;
  h.generation.seed = static_cast<std::int64_t>(p.seed);
  h.generation.guidance_scale = p.guidance_scale;
  h.extra["synthetic"] = true;

  // Tokens are spread over distinct rows; moving tracks sweep left to right.
  const double fc = (static_cast<double>(p.latent.frames) - 1.0) / 2.0;
  const double wmax = static_cast<double>(p.latent.width) - 1.0;
  const double n = static_cast<double>(p.token_texts.size());
  for (std::size_t t = 0; t < p.token_texts.size(); ++t) {
    const double y = (static_cast<double>(t) + 1.0) * (static_cast<double>(p.latent.height) - 1.0) / (n + 1.0);
    const Vec3 from{fc, y, p.moving ? 0.25 * wmax : 0.5 * wmax};
    const Vec3 to{fc, y, p.moving ? 0.75 * wmax : 0.5 * wmax};
    spec.tracks.push_back(linear_track(from, to, p.sigma_start, p.sigma_end, p.steps));
  }
  spec.noise = p.noise;
  spec.seed = p.seed;
  return spec;
}

SynthParams canonical_synth_params() {
  SynthParams p;
  p.steps = 25;
  p.blocks = 30;
  p.heads = 12;
  p.token_texts = {"cinematic", "video", "of", "a", "cat", "playing", "</s>", "<pad>"};
  p.latent = {4, 15, 26};
  p.out_frames = 61;
  p.out_height = 480;
  p.out_width = 832;
  p.dtype = DType::f16;
  p.sigma_start = 4.0;
  p.sigma_end = 1.0;
  p.moving = true;
  p.noise = 1e-3;
  p.seed = 58;
  p.model_id = "wan2.1-1.3b";
  p.prompt =
      "cinematic video of a cat playing with a soccer ball in front of the Eiffel Tower, "
      "realistic, 8k, high quality, masterpiece, best quality";
  p.negative_prompt =
      "Bright tones, overexposed, static, blurred details, subtitles, style, works, paintings, "
      "illustration, images, overall gray, worst quality, low quality, JPEG compression residue, "
      "ugly, incomplete";
  p.guidance_scale = 6.0;
  return p;
}

std::vector<double> gaussian_blob(std::size_t frames, std::size_t height, std::size_t width,
                                  const Vec3& center, double sigma) {
  if (!(sigma > 0.0)) {
    std::ostringstream os;
    os << "blob sigma must be > 0, got " << sigma;
    throw ParameterError(os.str());
  }
  std::vector<double> out(frames * height * width);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  std::size_t i = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const double df = static_cast<double>(f) - center[0];
    for (std::size_t y = 0; y < height; ++y) {
      const double dy = static_cast<double>(y) - center[1];
      for (std::size_t x = 0; x < width; ++x, ++i) {
        const double dx = static_cast<double>(x) - center[2];
        out[i] = std::exp(-(df * df + dy * dy + dx * dx) * inv);
      }
    }
  }
  return out;
}

void synth_dump(const std::filesystem::path& path, const SynthSpec& spec) {
  const auto& h = spec.header;
  check_header(h);
  if (!h.softmax_applied) throw ParameterError("synthetic dumps always hold softmax rows");
  if (spec.tracks.size() != h.dims.tokens) {
    throw ParameterError("synth spec needs one blob track per token");
  }
  if (spec.noise < 0.0) throw ParameterError("noise must be >= 0");
  const auto& d = h.dims;
  const std::size_t positions = d.positions();

  std::mt19937_64 rng(spec.seed);
  // Portable uniform in [0, 1): the standard distributions are not
  // bit-reproducible across library implementations.
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  std::vector<std::vector<double>> blobs(d.tokens);
  std::vector<double> row(positions);
  std::vector<float> encoded(d.heads * d.tokens * positions);

  write_dump(path, h, [&](std::size_t step, std::size_t, std::span<std::byte> out) {
    for (std::size_t t = 0; t < d.tokens; ++t) {
      blobs[t] = gaussian_blob(d.latent_frames, d.latent_h, d.latent_w, spec.tracks[t].center_at(step),
                               spec.tracks[t].sigma_at(step));
    }
    std::size_t k = 0;
    for (std::size_t head = 0; head < d.heads; ++head) {
      for (std::size_t t = 0; t < d.tokens; ++t) {
        double sum = 0.0;
        for (std::size_t i = 0; i < positions; ++i) {
          row[i] = blobs[t][i] + (spec.noise > 0.0 ? spec.noise * uniform() : 0.0);
          sum += row[i];
        }
        if (!(sum > 0.0)) {
          throw ParameterError("blob for token " + std::to_string(t) + " at step " +
                               std::to_string(step) + " has zero mass on the latent grid");
        }
        for (std::size_t i = 0; i < positions; ++i) encoded[k++] = static_cast<float>(row[i] / sum);
      }
    }
    encode_values(h.dtype, encoded, out);
  });
}

}  // namespace attnscope
