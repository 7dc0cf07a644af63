#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnscope/attention_store.hpp"
#include "attnscope/colormap.hpp"
#include "attnscope/image.hpp"
#include "attnscope/normalize.hpp"
#include "attnscope/selection.hpp"
#include "attnscope/upsample.hpp"

namespace attnscope {

/// Maps values in [0, 1] to lut[floor(v * 255 + 0.5)]. Values outside [0, 1]
/// (or NaN) throw ParameterError; normalize first.
RgbImage colorize(std::span<const double> values, std::size_t width, std::size_t height,
                  const Colormap& cmap);

/// Per channel round((1 - alpha) * base + alpha * heat). Sizes must match.
RgbImage overlay(const RgbImage& base, const RgbImage& heat, double alpha);

struct GridSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t cell_w = 0;
  std::size_t cell_h = 0;
  std::size_t padding = 0;
  Rgb background{0, 0, 0};
};

/// Default column count for n cells: ceil(sqrt(n)).
std::size_t default_grid_cols(std::size_t n) noexcept;
/// Grid spec sized for n cells at `cols` columns (0 picks the default).
GridSpec make_grid_spec(std::size_t n, std::size_t cols, std::size_t cell_w, std::size_t cell_h,
                        std::size_t padding, Rgb background = {0, 0, 0});

/// Cell i goes to row i / cols, column i % cols; cell (r, c) has its top-left
/// pixel at (padding + (cell_w + padding) c, padding + (cell_h + padding) r).
RgbImage compose_grid(std::span<const RgbImage> cells, const GridSpec& spec);

struct RenderSpec {
  NormMode norm = NormMode::percentile(1.0, 99.0);
  std::string cmap{kDefaultColormap};
  double alpha = 0.5;  // only used when base frames are supplied
  GridMapping mapping = GridMapping::endpoint_aligned;
};

/// Display range for a whole upsampled sequence. per_frame mode has none.
std::optional<DisplayRange> sequence_range(const Volume& upsampled, const NormMode& mode);

/// resolve -> upsample to the header's output shape -> normalize over the whole
/// volume -> colorize each frame -> optional overlay on `base_frames`.
std::vector<RgbImage> render_sequence(const AttentionStore& store, const Selection& sel,
                                      const RenderSpec& rspec,
                                      std::span<const RgbImage> base_frames = {});

/// One frame of a rendered sequence given its latent volume and a precomputed
/// range (nullopt means per-frame min/max). Identical to the matching element
/// of render_sequence when given the same range.
RgbImage render_frame(const Volume& latent, const Shape3& target, std::size_t frame,
                      const std::optional<DisplayRange>& range, const Colormap& cmap,
                      GridMapping mapping, const RgbImage* base = nullptr, double alpha = 0.5);

struct GridRequest {
  Selection sel;                   // `axis` (and `row_axis`) entries are overridden
  Axis axis = Axis::blocks;        // varies along columns
  std::optional<Axis> row_axis;    // when set, varies along rows (e.g. heads x steps)
  std::size_t frame = 0;           // output frame index
  std::size_t cols = 0;            // 0 -> ceil(sqrt(n)); ignored with row_axis
  double cell_scale = 0.25;        // cell size relative to the output frame
  std::size_t padding = 2;
  Rgb background{0, 0, 0};
  bool shared_range = true;        // one display range over every cell
  RenderSpec rspec;
};

/// Cell dimensions a request produces (never smaller than the latent grid).
std::pair<std::size_t, std::size_t> grid_cell_size(const DumpHeader& header, double cell_scale);

/// Renders the chosen output frame for every index along the axis (or axes)
/// and composes them into one image.
RgbImage render_grid(const AttentionStore& store, const GridRequest& req);

/// Writes frames as <name>_<index>.png, indices zero-padded to at least three
/// digits. Returns the written paths in order.
std::vector<std::filesystem::path> export_png_sequence(std::span<const RgbImage> frames,
                                                       const std::filesystem::path& dir,
                                                       const std::string& name);

/// Loads every *.png in `dir` in lexicographic order.
std::vector<RgbImage> load_png_sequence(const std::filesystem::path& dir);

}  // namespace attnscope
