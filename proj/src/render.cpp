#include "attnscope/render.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "attnscope/error.hpp"

namespace attnscope {

RgbImage colorize(std::span<const double> values, std::size_t width, std::size_t height,
                  const Colormap& cmap) {
  if (values.size() != width * height) throw ParameterError("colorize: value count != width x height");
  RgbImage img(width, height);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ParameterError("colorize: value " + std::to_string(v) + " outside [0, 1]");
    }
    const auto& c = cmap.lut[static_cast<std::size_t>(std::floor(v * 255.0 + 0.5))];
    img.pixels[3 * i] = c[0];
    img.pixels[3 * i + 1] = c[1];
    img.pixels[3 * i + 2] = c[2];
  }
  return img;
}

RgbImage overlay(const RgbImage& base, const RgbImage& heat, double alpha) {
  if (base.width != heat.width || base.height != heat.height) {
    throw ParameterError("overlay: base is " + std::to_string(base.width) + "x" +
                         std::to_string(base.height) + " but heatmap is " + std::to_string(heat.width) +
                         "x" + std::to_string(heat.height));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("overlay alpha must lie in [0, 1]");
  RgbImage out(base.width, base.height);
  for (std::size_t i = 0; i < base.pixels.size(); ++i) {
    const double v = (1.0 - alpha) * base.pixels[i] + alpha * heat.pixels[i];
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
  }
  return out;
}

std::size_t default_grid_cols(std::size_t n) noexcept {
  std::size_t c = 1;
  while (c * c < n) ++c;
  return c;
}

GridSpec make_grid_spec(std::size_t n, std::size_t cols, std::size_t cell_w, std::size_t cell_h,
                        std::size_t padding, Rgb background) {
  GridSpec g;
  g.cols = cols ? cols : default_grid_cols(n);
  g.rows = n == 0 ? 0 : (n + g.cols - 1) / g.cols;
  g.cell_w = cell_w;
  g.cell_h = cell_h;
  g.padding = padding;
  g.background = background;
  return g;
}

RgbImage compose_grid(std::span<const RgbImage> cells, const GridSpec& spec) {
  if (cells.size() > spec.rows * spec.cols) {
    throw ParameterError("grid " + std::to_string(spec.rows) + "x" + std::to_string(spec.cols) +
                         " cannot hold " + std::to_string(cells.size()) + " cells");
  }
  const std::size_t w = spec.padding + (spec.cell_w + spec.padding) * spec.cols;
  const std::size_t h = spec.padding + (spec.cell_h + spec.padding) * spec.rows;
  RgbImage out(w, h, spec.background);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    if (cell.width != spec.cell_w || cell.height != spec.cell_h) {
      throw ParameterError("grid cell " + std::to_string(i) + " is " + std::to_string(cell.width) + "x" +
                           std::to_string(cell.height) + ", expected " + std::to_string(spec.cell_w) +
                           "x" + std::to_string(spec.cell_h));
    }
    const std::size_t x0 = spec.padding + (spec.cell_w + spec.padding) * (i % spec.cols);
    const std::size_t y0 = spec.padding + (spec.cell_h + spec.padding) * (i / spec.cols);
    for (std::size_t r = 0; r < cell.height; ++r) {
      const auto* src = &cell.pixels[3 * r * cell.width];
      std::copy(src, src + 3 * cell.width, &out.pixels[3 * ((y0 + r) * w + x0)]);
    }
  }
  return out;
}

std::optional<DisplayRange> sequence_range(const Volume& upsampled, const NormMode& mode) {
  if (mode.kind == NormMode::Kind::per_frame_minmax) return std::nullopt;
  return compute_range(upsampled.values, mode);
}

namespace {

Shape3 output_target(const DumpHeader& h) {
  return {h.output_shape.frames, h.output_shape.height, h.output_shape.width};
}

RgbImage finish_frame(std::vector<double>& values, const Shape3& target,
                      const std::optional<DisplayRange>& range, const Colormap& cmap,
                      const RgbImage* base, double alpha) {
  const auto r = range ? *range : compute_range(values, NormMode::global_minmax());
  apply_range(values, r, values);
  auto heat = colorize(values, target.width, target.height, cmap);
  return base ? overlay(*base, heat, alpha) : heat;
}

}  // namespace

RgbImage render_frame(const Volume& latent, const Shape3& target, std::size_t frame,
                      const std::optional<DisplayRange>& range, const Colormap& cmap,
                      GridMapping mapping, const RgbImage* base, double alpha) {
  auto values = upsample_frame(latent, target, frame, mapping);
  return finish_frame(values, target, range, cmap, base, alpha);
}

std::vector<RgbImage> render_sequence(const AttentionStore& store, const Selection& sel,
                                      const RenderSpec& rspec, std::span<const RgbImage> base_frames) {
  const auto cmap = get_colormap(rspec.cmap);
  const auto target = output_target(store.header());
  if (!base_frames.empty() && base_frames.size() != target.frames) {
    throw ParameterError("overlay needs " + std::to_string(target.frames) + " base frames, got " +
                         std::to_string(base_frames.size()));
  }
  auto volume = upsample_trilinear(resolve_one(store, sel), target, rspec.mapping);
  const auto range = sequence_range(volume, rspec.norm);
  std::vector<RgbImage> frames;
  frames.reserve(target.frames);
  std::vector<double> values(target.frame_size());
  for (std::size_t f = 0; f < target.frames; ++f) {
    const auto src = volume.frame(f);
    std::copy(src.begin(), src.end(), values.begin());
    frames.push_back(finish_frame(values, target, range, cmap,
                                  base_frames.empty() ? nullptr : &base_frames[f], rspec.alpha));
  }
  return frames;
}

std::pair<std::size_t, std::size_t> grid_cell_size(const DumpHeader& h, double cell_scale) {
  if (!(cell_scale > 0.0 && cell_scale <= 1.0)) throw ParameterError("cell scale must lie in (0, 1]");
  auto scaled = [&](std::size_t out, std::size_t latent) {
    return std::max(latent, static_cast<std::size_t>(std::lround(static_cast<double>(out) * cell_scale)));
  };
  return {scaled(h.output_shape.width, h.dims.latent_w), scaled(h.output_shape.height, h.dims.latent_h)};
}

RgbImage render_grid(const AttentionStore& store, const GridRequest& req) {
  const auto& h = store.header();
  if (req.frame >= h.output_shape.frames) {
    throw BoundsError("frame " + std::to_string(req.frame) + " out of range [0, " +
                      std::to_string(h.output_shape.frames) + ")");
  }
  if (req.row_axis && *req.row_axis == req.axis) {
    throw ParameterError("grid row axis must differ from the column axis");
  }
  const auto cmap = get_colormap(req.rspec.cmap);
  const auto [cell_w, cell_h] = grid_cell_size(h, req.cell_scale);
  const Shape3 target{h.output_shape.frames, cell_h, cell_w};

  std::vector<Volume> latents;
  if (req.row_axis) {
    const std::size_t rows = axis_extent(h.dims, *req.row_axis);
    for (std::size_t r = 0; r < rows; ++r) {
      Selection s = req.sel;
      s.on(*req.row_axis) = AxisSel::single(r);
      s.on(req.axis) = AxisSel::all();
      auto row = resolve(store, s);
      std::move(row.begin(), row.end(), std::back_inserter(latents));
    }
  } else {
    Selection s = req.sel;
    s.on(req.axis) = AxisSel::all();
    latents = resolve(store, s);
  }

  std::vector<std::vector<double>> planes;
  planes.reserve(latents.size());
  for (const auto& v : latents) planes.push_back(upsample_frame(v, target, req.frame, req.rspec.mapping));

  std::optional<DisplayRange> shared;
  if (req.shared_range) {
    std::vector<double> all;
    all.reserve(planes.size() * target.frame_size());
    for (const auto& p : planes) all.insert(all.end(), p.begin(), p.end());
    const auto mode = req.rspec.norm.kind == NormMode::Kind::per_frame_minmax ? NormMode::global_minmax()
                                                                               : req.rspec.norm;
    shared = compute_range(all, mode);
  }
  std::vector<RgbImage> cells;
  cells.reserve(planes.size());
  for (auto& p : planes) {
    std::optional<DisplayRange> range = shared;
    if (!range && req.rspec.norm.kind != NormMode::Kind::per_frame_minmax) {
      range = compute_range(p, req.rspec.norm);
    }
    cells.push_back(finish_frame(p, target, range, cmap, nullptr, 0.0));
  }
  const std::size_t cols = req.row_axis ? axis_extent(h.dims, req.axis) : req.cols;
  return compose_grid(cells, make_grid_spec(cells.size(), cols, cell_w, cell_h, req.padding, req.background));
}

std::vector<std::filesystem::path> export_png_sequence(std::span<const RgbImage> frames,
                                                       const std::filesystem::path& dir,
                                                       const std::string& name) {
  std::vector<std::filesystem::path> written;
  if (frames.empty()) return written;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  int digits = 3;
  for (std::size_t n = frames.size() - 1; n >= 1000; n /= 10) ++digits;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::ostringstream file;
    file << name << "_" << std::setw(digits) << std::setfill('0') << i << ".png";
    const auto path = dir / file.str();
    write_png(path, frames[i]);
    written.push_back(path);
  }
  return written;
}

std::vector<RgbImage> load_png_sequence(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") paths.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(paths.begin(), paths.end());
  std::vector<RgbImage> frames;
  for (const auto& p : paths) frames.push_back(read_png(p));
  return frames;
}

}  // namespace attnscope
