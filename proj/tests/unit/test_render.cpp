#include <doctest.h>

#include <random>

#include "attnscope/attention_store.hpp"
#include "attnscope/colormap.hpp"
#include "attnscope/error.hpp"
#include "attnscope/normalize.hpp"
#include "attnscope/render.hpp"
#include "attnscope/synth.hpp"
#include "test_support.hpp"

using namespace attnscope;
using namespace attnscope::testing;

namespace {

RgbImage solid(std::size_t w, std::size_t h, Rgb c) { return RgbImage(w, h, c); }

// Dump holding a single spike for token 0 and a constant map for token 1.
void write_spike_dump(const std::filesystem::path& path, const DumpHeader& h, std::size_t spike_pos) {
  const auto& d = h.dims;
  write_dump(path, h, [&](std::size_t, std::size_t, std::span<std::byte> out) {
    std::vector<float> values;
    for (std::size_t hd = 0; hd < d.heads; ++hd)
      for (std::size_t t = 0; t < d.tokens; ++t)
        for (std::size_t p = 0; p < d.positions(); ++p) values.push_back(t == 0 ? (p == spike_pos ? 1.0f : 0.0f) : 0.25f);
    encode_values(h.dtype, values, out);
  });
}

}  // namespace

TEST_CASE("colorize") {
  const auto cmap = get_colormap("inferno");
  SUBCASE("endpoints and midpoint") {
    const std::vector<double> v{0.0, 0.5, 1.0, 0.1};
    const auto img = colorize(v, 4, 1, cmap);
    CHECK(img.get(0, 0) == cmap.lut[0]);
    CHECK(img.get(1, 0) == cmap.lut[128]);
    CHECK(img.get(2, 0) == cmap.lut[255]);
    CHECK(img.get(3, 0) == cmap.lut[26]);
  }
  SUBCASE("checkerboard") {
    std::vector<double> v(16);
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) v[y * 4 + x] = (x + y) % 2;
    const auto img = colorize(v, 4, 4, cmap);
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) CHECK(img.get(x, y) == cmap.lut[(x + y) % 2 ? 255 : 0]);
  }
  SUBCASE("out-of-range values are rejected") {
    CHECK_THROWS_AS(colorize(std::vector<double>{1.01}, 1, 1, cmap), ParameterError);
    CHECK_THROWS_AS(colorize(std::vector<double>{-0.01}, 1, 1, cmap), ParameterError);
    CHECK_THROWS_AS(colorize(std::vector<double>{std::nan("")}, 1, 1, cmap), ParameterError);
    CHECK_THROWS_AS(colorize(std::vector<double>{0.5, 0.5}, 3, 1, cmap), ParameterError);
  }
  SUBCASE("normalize then colorize is invariant to positive affine maps") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Volume v(Shape3{1, 8, 8});
    for (auto& x : v.values) x = u(rng);
    Volume w = v;
    for (auto& x : w.values) x = 3.0 * x + 2.0;
    for (const auto& mode : {NormMode::global_minmax(), NormMode::percentile(1, 99)}) {
      const auto a = colorize(normalize_display(v, mode).values, 8, 8, cmap);
      const auto b = colorize(normalize_display(w, mode).values, 8, 8, cmap);
      std::size_t differing = 0;
      for (std::size_t i = 0; i < a.pixels.size(); i += 3) {
        if (a.get(i / 3 % 8, i / 24) != b.get(i / 3 % 8, i / 24)) ++differing;
      }
      // Rounding at exact bin boundaries can move at most one level.
      CHECK(differing <= 1);
    }
  }
}

TEST_CASE("colormaps") {
  const auto names = builtin_colormap_names();
  for (const char* n : {"inferno", "magma", "viridis", "turbo", "gray"}) {
    CHECK(std::find(names.begin(), names.end(), n) != names.end());
  }
  const auto gray = get_colormap("gray");
  for (int i = 0; i < 256; ++i) REQUIRE(gray.lut[i] == Rgb{std::uint8_t(i), std::uint8_t(i), std::uint8_t(i)});
  const auto inferno = get_colormap(kDefaultColormap);
  CHECK(inferno.lut[0] == Rgb{0, 0, 4});
  CHECK(inferno.lut[255][0] > 240);

  std::string good;
  for (int i = 0; i < 256; ++i) good += std::to_string(i) + " 0 " + std::to_string(255 - i) + "\n";
  CHECK(parse_colormap("x", good).lut[10] == Rgb{10, 0, 245});
  CHECK_THROWS_AS(parse_colormap("x", good + "1 2 3\n"), ParameterError);
  CHECK_THROWS_AS(parse_colormap("x", "0 0 0\n"), ParameterError);
  CHECK_THROWS_AS(parse_colormap("x", std::string(good).replace(0, 1, "256")), ParameterError);
  CHECK_THROWS_AS(get_colormap("no_such_colormap"), Error);

  TempDir dir;
  {
    std::ofstream(dir / "mine.txt") << good;
  }
  CHECK(get_colormap((dir / "mine.txt").string()).lut[255] == Rgb{255, 0, 0});
}

TEST_CASE("overlay") {
  const auto base = solid(3, 2, {100, 100, 100});
  const auto heat = solid(3, 2, {200, 0, 255});
  CHECK(overlay(base, heat, 0.0) == base);
  CHECK(overlay(base, heat, 1.0) == heat);
  CHECK(overlay(base, heat, 0.5).get(2, 1) == Rgb{150, 50, 178});
  CHECK_THROWS_AS(overlay(base, solid(2, 2, {}), 0.5), ParameterError);
  CHECK_THROWS_AS(overlay(base, heat, 1.5), ParameterError);
}

TEST_CASE("compose_grid") {
  SUBCASE("thirty cells in six columns make five rows") {
    std::vector<RgbImage> cells;
    for (std::size_t i = 0; i < 30; ++i) cells.push_back(solid(5, 4, {std::uint8_t(i), 1, 2}));
    const auto spec = make_grid_spec(30, 6, 5, 4, 2);
    CHECK(spec.rows == 5);
    const auto g = compose_grid(cells, spec);
    CHECK(g.width == 2 + 6 * (5 + 2));
    CHECK(g.height == 2 + 5 * (4 + 2));
    // Cell 7 is row 1, column 1.
    CHECK(crop(g, 2 + 7, 2 + 6, 5, 4) == cells[7]);
  }
  SUBCASE("default column count") {
    CHECK(default_grid_cols(25) == 5);
    CHECK(default_grid_cols(30) == 6);
    CHECK(default_grid_cols(12) == 4);
    CHECK(default_grid_cols(1) == 1);
    const auto spec = make_grid_spec(25, 0, 1, 1, 0);
    CHECK(spec.rows == 5);
    CHECK(spec.cols == 5);
  }
  SUBCASE("single cell is padded on every side") {
    const std::vector<RgbImage> one{solid(4, 4, {9, 9, 9})};
    const auto g = compose_grid(one, make_grid_spec(1, 0, 4, 4, 2, {1, 2, 3}));
    CHECK(g.width == 8);
    CHECK(g.height == 8);
    CHECK(g.get(0, 0) == Rgb{1, 2, 3});
    CHECK(g.get(7, 7) == Rgb{1, 2, 3});
    CHECK(crop(g, 2, 2, 4, 4) == one[0]);
  }
  SUBCASE("cropping any cell returns it unchanged") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 1 + rng() % 20, w = 1 + rng() % 7, h = 1 + rng() % 7, pad = rng() % 4;
      const std::size_t cols = rng() % 6;
      std::vector<RgbImage> cells;
      for (std::size_t i = 0; i < n; ++i) {
        RgbImage c(w, h);
        for (auto& p : c.pixels) p = static_cast<std::uint8_t>(rng());
        cells.push_back(std::move(c));
      }
      const auto spec = make_grid_spec(n, cols, w, h, pad);
      const auto g = compose_grid(cells, spec);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = i / spec.cols, c = i % spec.cols;
        REQUIRE(crop(g, pad + (w + pad) * c, pad + (h + pad) * r, w, h) == cells[i]);
      }
    }
  }
  SUBCASE("mismatched cells are rejected") {
    const std::vector<RgbImage> cells{solid(2, 2, {}), solid(3, 2, {})};
    CHECK_THROWS_AS(compose_grid(cells, make_grid_spec(2, 0, 2, 2, 0)), ParameterError);
    CHECK_THROWS_AS(compose_grid(cells, make_grid_spec(1, 0, 2, 2, 0)), ParameterError);
  }
}

TEST_CASE("render_sequence") {
  TempDir dir;
  // latent 3x5x5 -> output 7x11x11 under the toy header.
  const auto h = toy_header(2, 1, 1, 2, 3, 5, 5);
  const std::size_t spike = (1 * 5 + 2) * 5 + 2;  // center of the latent grid
  write_spike_dump(dir / "d.attn", h, spike);
  const auto store = AttentionStore::open(dir / "d.attn");
  RenderSpec rs;
  rs.cmap = "gray";
  rs.norm = NormMode::global_minmax();

  SUBCASE("spike is brightest at the upsampled center") {
    const auto frames = render_sequence(*store, Selection{0}, rs);
    REQUIRE(frames.size() == 7);
    const auto& mid = frames[3];
    CHECK(mid.width == 11);
    CHECK(mid.height == 11);
    CHECK(mid.get(5, 5) == Rgb{255, 255, 255});
    for (std::size_t y = 0; y < 11; ++y)
      for (std::size_t x = 0; x < 11; ++x)
        if (x != 5 || y != 5) REQUIRE(mid.get(x, y)[0] < 255);
    CHECK(frames[0].get(0, 0) == Rgb{0, 0, 0});
  }
  SUBCASE("constant map renders lut[0] everywhere") {
    const auto frames = render_sequence(*store, Selection{1}, rs);
    for (const auto& f : frames)
      for (std::size_t i = 0; i < f.pixels.size(); ++i) REQUIRE(f.pixels[i] == 0);
  }
  SUBCASE("render_frame agrees with the sequence") {
    rs.cmap = "viridis";
    rs.norm = NormMode::percentile(1, 99);
    const auto frames = render_sequence(*store, Selection{0}, rs);
    const auto latent = resolve_one(*store, Selection{0});
    const auto up = upsample_trilinear(latent, {7, 11, 11});
    const auto range = sequence_range(up, rs.norm);
    for (std::size_t f = 0; f < 7; ++f) {
      CHECK(render_frame(latent, {7, 11, 11}, f, range, get_colormap("viridis"), rs.mapping) == frames[f]);
    }
  }
  SUBCASE("overlay on base frames") {
    const std::vector<RgbImage> base(7, solid(11, 11, {0, 0, 200}));
    rs.alpha = 1.0;
    CHECK(render_sequence(*store, Selection{0}, rs, base) == render_sequence(*store, Selection{0}, rs));
    CHECK_THROWS_AS(render_sequence(*store, Selection{0}, rs, std::span(base).first(3)), ParameterError);
  }
}

TEST_CASE("render_grid") {
  TempDir dir;
  SynthParams p;
  p.steps = 3;
  p.blocks = 5;
  p.heads = 2;
  p.dtype = DType::f32;
  synth_dump(dir / "g.attn", make_synth_spec(p));
  const auto store = AttentionStore::open(dir / "g.attn");
  const auto [cw, ch] = grid_cell_size(store->header(), 0.25);
  CHECK(cw == 16);
  CHECK(ch == 12);

  GridRequest req;
  req.axis = Axis::blocks;
  req.padding = 1;
  const auto g = render_grid(*store, req);
  CHECK(g.width == 1 + 3 * (16 + 1));
  CHECK(g.height == 1 + 2 * (12 + 1));

  req.row_axis = Axis::steps;
  req.axis = Axis::heads;
  const auto two = render_grid(*store, req);
  CHECK(two.width == 1 + 2 * 17);
  CHECK(two.height == 1 + 3 * 13);

  req.shared_range = false;
  CHECK_NOTHROW(render_grid(*store, req));
  req.row_axis = Axis::heads;
  CHECK_THROWS_AS(render_grid(*store, req), ParameterError);
  req.row_axis.reset();
  req.frame = 13;
  CHECK_THROWS_AS(render_grid(*store, req), BoundsError);
}

TEST_CASE("png export") {
  TempDir dir;
  std::vector<RgbImage> frames;
  for (int i = 0; i < 3; ++i) {
    RgbImage img(5, 3);
    for (std::size_t k = 0; k < img.pixels.size(); ++k) img.pixels[k] = static_cast<std::uint8_t>(k * 7 + i);
    frames.push_back(img);
  }
  const auto paths = export_png_sequence(frames, dir / "out", "tok");
  REQUIRE(paths.size() == 3);
  CHECK(paths[0].filename() == "tok_000.png");
  CHECK(paths[2].filename() == "tok_002.png");
  CHECK(load_png_sequence(dir / "out") == frames);
  const auto first = read_file(paths[1]);
  export_png_sequence(frames, dir / "again", "tok");
  CHECK(read_file(dir / "again" / "tok_001.png") == first);
  CHECK(export_png_sequence({}, dir / "empty", "tok").empty());
  CHECK(decode_png(encode_png(frames[1])) == frames[1]);
  CHECK_THROWS_AS(decode_png(std::vector<std::uint8_t>{1, 2, 3}), Error);

  std::vector<RgbImage> many(1001, RgbImage(1, 1));
  const auto wide = export_png_sequence(many, dir / "many", "f");
  CHECK(wide.back().filename() == "f_1000.png");
}
