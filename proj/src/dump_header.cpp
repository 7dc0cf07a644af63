#include "attnscope/dump_header.hpp"

#include <set>

#include "attnscope/error.hpp"

namespace attnscope {

using nlohmann::json;

std::size_t element_size(DType dtype) noexcept { return dtype == DType::f16 ? 2 : 4; }

std::string_view to_string(DType dtype) noexcept { return dtype == DType::f16 ? "f16" : "f32"; }

std::string_view to_string(CfgBranch branch) noexcept {
  return branch == CfgBranch::cond ? "cond" : "uncond";
}

std::size_t DumpHeader::chunk_bytes() const noexcept {
  return dims.heads * dims.tokens * dims.positions() * element_bytes();
}

void check_header(const DumpHeader& h) {
  if (h.version != 1) {
    throw FormatError("unsupported dump version " + std::to_string(h.version));
  }
  const auto& d = h.dims;
  if (d.steps == 0 || d.blocks == 0 || d.heads == 0 || d.tokens == 0 || d.latent_frames == 0 ||
      d.latent_h == 0 || d.latent_w == 0) {
    throw FormatError("header dims must all be strictly positive");
  }
  const auto& o = h.output_shape;
  if (o.frames == 0 || o.height == 0 || o.width == 0) {
    throw FormatError("header output_shape must be strictly positive");
  }
  if (d.latent_frames > o.frames || d.latent_h > o.height || d.latent_w > o.width) {
    throw FormatError("latent grid exceeds output_shape");
  }
  if (d.tokens != h.tokens.size()) {
    throw FormatError("dims.tokens (" + std::to_string(d.tokens) + ") != length of tokens (" +
                      std::to_string(h.tokens.size()) + ")");
  }
  for (std::size_t i = 0; i < h.tokens.size(); ++i) {
    if (h.tokens[i].index != i) {
      throw FormatError("token indices must be contiguous from 0; entry " + std::to_string(i) +
                        " has index " + std::to_string(h.tokens[i].index));
    }
  }
}

namespace {

std::size_t get_count(const json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw FormatError(std::string("header field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::optional<std::string> get_optional_text(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "version", "model_id",        "prompt",     "negative_prompt", "tokens",    "dims",
      "output_shape", "dtype", "softmax_applied", "cfg_branch", "generation"};
  return keys;
}

}  // namespace

json header_to_json(const DumpHeader& h) {
  json j = h.extra.is_object() ? h.extra : json::object();
  j["version"] = h.version;
  j["model_id"] = h.model_id;
  j["prompt"] = h.prompt;
  j["negative_prompt"] = h.negative_prompt ? json(*h.negative_prompt) : json(nullptr);
  json tokens = json::array();
  for (const auto& t : h.tokens) {
    tokens.push_back({{"index", t.index}, {"text", t.text}, {"is_special", t.is_special}});
  }
  j["tokens"] = std::move(tokens);
  j["dims"] = {{"steps", h.dims.steps},
               {"blocks", h.dims.blocks},
               {"heads", h.dims.heads},
               {"tokens", h.dims.tokens},
               {"latent_frames", h.dims.latent_frames},
               {"latent_h", h.dims.latent_h},
               {"latent_w", h.dims.latent_w}};
  j["output_shape"] = {
      {"frames", h.output_shape.frames}, {"height", h.output_shape.height}, {"width", h.output_shape.width}};
  j["dtype"] = to_string(h.dtype);
  j["softmax_applied"] = h.softmax_applied;
  j["cfg_branch"] = to_string(h.cfg_branch);
  j["generation"] = {{"seed", h.generation.seed},
                     {"guidance_scale", h.generation.guidance_scale},
                     {"scheduler_name", h.generation.scheduler_name ? json(*h.generation.scheduler_name)
                                                                    : json(nullptr)}};
  return j;
}

DumpHeader header_from_json(const json& j) {
  DumpHeader h;
  try {
    if (!j.is_object()) throw FormatError("header is not a JSON object");
    h.version = j.at("version").get<int>();
    h.model_id = j.at("model_id").get<std::string>();
    h.prompt = j.at("prompt").get<std::string>();
    h.negative_prompt = get_optional_text(j, "negative_prompt");
    for (const auto& t : j.at("tokens")) {
      h.tokens.push_back({get_count(t, "index"), t.at("text").get<std::string>(),
                          t.at("is_special").get<bool>()});
    }
    const auto& d = j.at("dims");
    h.dims = {get_count(d, "steps"),         get_count(d, "blocks"),   get_count(d, "heads"),
              get_count(d, "tokens"),        get_count(d, "latent_frames"),
              get_count(d, "latent_h"),      get_count(d, "latent_w")};
    const auto& o = j.at("output_shape");
    h.output_shape = {get_count(o, "frames"), get_count(o, "height"), get_count(o, "width")};
    const auto dtype = j.at("dtype").get<std::string>();
    if (dtype == "f16") {
      h.dtype = DType::f16;
    } else if (dtype == "f32") {
      h.dtype = DType::f32;
    } else {
      throw FormatError("unknown dtype '" + dtype + "'");
    }
    h.softmax_applied = j.at("softmax_applied").get<bool>();
    const auto branch = j.at("cfg_branch").get<std::string>();
    if (branch == "cond") {
      h.cfg_branch = CfgBranch::cond;
    } else if (branch == "uncond") {
      h.cfg_branch = CfgBranch::uncond;
    } else {
      throw FormatError("unknown cfg_branch '" + branch + "'");
    }
    const auto& g = j.at("generation");
    h.generation.seed = g.at("seed").get<std::int64_t>();
    h.generation.guidance_scale = g.at("guidance_scale").get<double>();
    h.generation.scheduler_name = get_optional_text(g, "scheduler_name");
    for (const auto& [key, value] : j.items()) {
      if (!known_keys().count(key)) h.extra[key] = value;
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed header: ") + e.what());
  }
  check_header(h);
  return h;
}

std::vector<TokenEntry> make_tokens(const std::vector<std::string>& texts,
                                    const std::vector<bool>& is_special) {
  std::vector<TokenEntry> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back({i, texts[i], i < is_special.size() && is_special[i]});
  }
  return out;
}

}  // namespace attnscope
