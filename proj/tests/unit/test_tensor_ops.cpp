#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "attnscope/attention_store.hpp"
#include "attnscope/error.hpp"
#include "attnscope/focus_stats.hpp"
#include "attnscope/normalize.hpp"
#include "attnscope/selection.hpp"
#include "attnscope/synth.hpp"
#include "attnscope/upsample.hpp"
#include "test_support.hpp"

using namespace attnscope;
using namespace attnscope::testing;

namespace {

// Direct trilinear evaluation at one output coordinate, written independently
// of the separable implementation: eight corner weights per output voxel.
double trilinear_oracle(const Volume& v, const Shape3& out, std::size_t t, std::size_t y, std::size_t x) {
  auto coord = [](std::size_t i, std::size_t n_in, std::size_t n_out) {
    return n_out > 1 ? static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1)
                     : static_cast<double>(n_in - 1) / 2.0;
  };
  const double c[3] = {coord(t, v.shape.frames, out.frames), coord(y, v.shape.height, out.height),
                       coord(x, v.shape.width, out.width)};
  const std::size_t n[3] = {v.shape.frames, v.shape.height, v.shape.width};
  std::size_t lo[3];
  double w[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::min(static_cast<std::size_t>(std::floor(c[a])), n[a] - 1);
    w[a] = c[a] - static_cast<double>(lo[a]);
  }
  double sum = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    std::size_t idx[3];
    double weight = 1.0;
    for (int a = 0; a < 3; ++a) {
      const bool up = (corner >> a) & 1;
      idx[a] = std::min(lo[a] + (up ? 1 : 0), n[a] - 1);
      weight *= up ? w[a] : 1.0 - w[a];
    }
    sum += weight * v.at(idx[0], idx[1], idx[2]);
  }
  return sum;
}

Volume random_volume(Shape3 s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Volume v(s);
  for (auto& x : v.values) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("resolve") {
  TempDir dir;
  const auto h = toy_header(2, 2, 2, 2, 1, 2, 3, DType::f32);
  write_formula_dump(dir / "t.attn", h);
  const auto store = AttentionStore::open(dir / "t.attn");

  SUBCASE("mean over heads is the elementwise average") {
    Selection sel{1, AxisSel::single(1), AxisSel::single(0), AxisSel::mean()};
    const auto v = resolve_one(*store, sel);
    const auto r0 = store->get_map(1, 1, 0, 0), r1 = store->get_map(1, 1, 0, 1);
    for (std::size_t i = 0; i < v.values.size(); ++i) CHECK(v.values[i] == (r0.values[i] + r1.values[i]) / 2);
  }
  SUBCASE("steps=all returns one volume per step equal to direct reads") {
    Selection sel{0, AxisSel::all(), AxisSel::single(1), AxisSel::single(0)};
    const auto vs = resolve(*store, sel);
    REQUIRE(vs.size() == 2);
    for (std::size_t s = 0; s < 2; ++s) CHECK(vs[s] == store->get_map(0, s, 1, 0));
  }
  SUBCASE("mean over every axis is the brute-force grand mean") {
    for (std::size_t t = 0; t < 2; ++t) {
      const auto v = resolve_one(*store, Selection{t});
      for (std::size_t p = 0; p < 6; ++p) {
        double total = 0.0;
        for (std::size_t s = 0; s < 2; ++s)
          for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t hd = 0; hd < 2; ++hd) total += formula_value(s, b, hd, t, p);
        CHECK(std::abs(v.values[p] - total / 8.0) <= 1e-12);
      }
    }
  }
  SUBCASE("all-single selection is identical to get_map") {
    Selection sel{1, AxisSel::single(0), AxisSel::single(1), AxisSel::single(1)};
    const auto v = resolve_one(*store, sel);
    const auto m = store->get_map(1, 0, 1, 1);
    CHECK(std::memcmp(v.values.data(), m.values.data(), v.values.size() * sizeof(double)) == 0);
  }
  SUBCASE("mean of a whole axis equals the mean of its per-index volumes") {
    const auto per_block = resolve(*store, Selection{0, AxisSel::single(1), AxisSel::all(), AxisSel::mean()});
    const auto meaned = resolve_one(*store, Selection{0, AxisSel::single(1), AxisSel::mean(), AxisSel::mean()});
    for (std::size_t p = 0; p < 6; ++p) {
      CHECK(meaned.values[p] == doctest::Approx((per_block[0].values[p] + per_block[1].values[p]) / 2).epsilon(1e-14));
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(resolve(*store, Selection{0, AxisSel::all(), AxisSel::all(), AxisSel::mean()}), ParameterError);
    CHECK_THROWS_AS(resolve(*store, Selection{2}), BoundsError);
    CHECK_THROWS_AS(resolve(*store, Selection{0, AxisSel::single(2)}), BoundsError);
    CHECK_THROWS_AS(resolve_one(*store, Selection{0, AxisSel::all()}), ParameterError);
  }
  SUBCASE("axis selector parsing") {
    CHECK(parse_axis_sel("mean", 25) == AxisSel::mean());
    CHECK(parse_axis_sel("first", 25) == AxisSel::single(0));
    CHECK(parse_axis_sel("middle", 25) == AxisSel::single(12));
    CHECK(parse_axis_sel("last", 25) == AxisSel::single(24));
    CHECK(parse_axis_sel("7", 25) == AxisSel::single(7));
    CHECK_THROWS_AS(parse_axis_sel("25", 25), BoundsError);
    CHECK_THROWS_AS(parse_axis_sel("-1", 25), ParameterError);
    CHECK_THROWS_AS(parse_axis_sel("x", 25), ParameterError);
  }
  SUBCASE("token lookup by text") {
    auto hdr = store->header();
    CHECK(find_token(hdr, "tok1") == 1);
    CHECK_THROWS_AS(find_token(hdr, "cat"), ParameterError);
    hdr.tokens[0].text = "tok1";
    try {
      find_token(hdr, "tok1");
      FAIL("expected ambiguity error");
    } catch (const ParameterError& e) {
      CHECK(std::string(e.what()).find("ambiguous") != std::string::npos);
    }
    hdr.tokens[0].is_special = true;  // special tokens are not candidates
    CHECK(find_token(hdr, "tok1") == 1);
  }
}

TEST_CASE("upsample_trilinear") {
  std::mt19937_64 rng(42);
  SUBCASE("constants are preserved exactly") {
    Volume c(Shape3{3, 4, 5}, 0.37);
    const auto u = upsample_trilinear(c, {7, 9, 11});
    for (double x : u.values) REQUIRE(x == 0.37);
  }
  SUBCASE("[0, 1] to length 3 gives [0, 0.5, 1]") {
    Volume v(Shape3{1, 1, 2}, std::vector<double>{0.0, 1.0});
    const auto u = upsample_trilinear(v, {1, 1, 3});
    CHECK(u.values == std::vector<double>{0.0, 0.5, 1.0});
  }
  SUBCASE("matches the direct trilinear formula at every output voxel") {
    const auto v = random_volume({3, 4, 5}, rng);
    const Shape3 out{7, 9, 11};
    const auto u = upsample_trilinear(v, out);
    double worst = 0.0;
    for (std::size_t t = 0; t < 7; ++t)
      for (std::size_t y = 0; y < 9; ++y)
        for (std::size_t x = 0; x < 11; ++x) worst = std::max(worst, std::abs(u.at(t, y, x) - trilinear_oracle(v, out, t, y, x)));
    CHECK(worst <= 1e-6);
  }
  SUBCASE("output stays within input bounds") {
    for (int trial = 0; trial < 20; ++trial) {
      const Shape3 in{1 + rng() % 4, 1 + rng() % 5, 1 + rng() % 6};
      const Shape3 out{in.frames + rng() % 5, in.height + rng() % 7, in.width + rng() % 9};
      const auto v = random_volume(in, rng);
      const auto [mn, mx] = std::minmax_element(v.values.begin(), v.values.end());
      for (double x : upsample_trilinear(v, out).values) REQUIRE((x >= *mn && x <= *mx));
    }
  }
  SUBCASE("single-frame output samples the temporal center") {
    Volume v(Shape3{3, 1, 1}, std::vector<double>{0.0, 2.0, 10.0});
    CHECK(source_coordinate(0, 3, 1, GridMapping::endpoint_aligned) == 1.0);
    CHECK(upsample_trilinear(v, {3, 1, 1}).values == v.values);
  }
  SUBCASE("upsample_frame equals the matching slice") {
    const auto v = random_volume({4, 3, 5}, rng);
    const Shape3 out{13, 10, 17};
    const auto full = upsample_trilinear(v, out);
    for (std::size_t f = 0; f < out.frames; ++f) {
      const auto frame = upsample_frame(v, out, f);
      const auto slice = full.frame(f);
      REQUIRE(std::equal(frame.begin(), frame.end(), slice.begin()));
    }
  }
  SUBCASE("cell-centered mapping is available and bounded") {
    const auto v = random_volume({2, 3, 4}, rng);
    const auto u = upsample_trilinear(v, {4, 6, 8}, GridMapping::cell_centered);
    const auto [mn, mx] = std::minmax_element(v.values.begin(), v.values.end());
    for (double x : u.values) REQUIRE((x >= *mn && x <= *mx));
    CHECK(source_coordinate(0, 3, 6, GridMapping::cell_centered) == 0.0);
    CHECK(source_coordinate(1, 3, 6, GridMapping::cell_centered) == doctest::Approx(0.25));
  }
  SUBCASE("downsampling is rejected") {
    CHECK_THROWS_AS(upsample_trilinear(Volume(Shape3{3, 4, 5}), {3, 3, 5}), ParameterError);
  }
  SUBCASE("normalized center of mass survives upsampling for smooth blobs") {
    const Shape3 in{16, 30, 52};
    const Shape3 out{61, 120, 208};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      const double sigma = 2.0 + 2.0 * u(rng);
      const Vec3 c{u(rng) * 15, u(rng) * 29, u(rng) * 51};
      const Volume v(in, gaussian_blob(in.frames, in.height, in.width, c, sigma));
      const auto a = center_of_mass(v);
      const auto b = center_of_mass(upsample_trilinear(v, out));
      CHECK(std::abs(a[0] / 15 - b[0] / 60) <= 0.02);
      CHECK(std::abs(a[1] / 29 - b[1] / 119) <= 0.02);
      CHECK(std::abs(a[2] / 51 - b[2] / 207) <= 0.02);
    }
  }
}

TEST_CASE("normalize_display") {
  SUBCASE("global min/max") {
    const Volume v(Shape3{1, 1, 3}, std::vector<double>{0.2, 0.4, 0.6});
    const auto n = normalize_display(v, NormMode::global_minmax());
    CHECK(n.values[0] == 0.0);
    CHECK(n.values[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(n.values[2] == 1.0);
  }
  SUBCASE("constant input maps to zeros in every mode") {
    const Volume v(Shape3{2, 3, 4}, 0.37);
    for (const auto& m : {NormMode::global_minmax(), NormMode::per_frame_minmax(), NormMode::percentile(1, 99)}) {
      for (double x : normalize_display(v, m).values) CHECK(x == 0.0);
    }
  }
  SUBCASE("per-frame ranges") {
    const Volume v(Shape3{2, 1, 2}, std::vector<double>{0.0, 1.0, 10.0, 30.0});
    CHECK(normalize_display(v, NormMode::per_frame_minmax()).values == std::vector<double>{0.0, 1.0, 0.0, 1.0});
  }
  SUBCASE("fixed range clamps") {
    const Volume v(Shape3{1, 1, 4}, std::vector<double>{-1.0, 0.0, 0.5, 2.0});
    CHECK(normalize_display(v, NormMode::fixed(0.0, 1.0)).values == std::vector<double>{0.0, 0.0, 0.5, 1.0});
  }
  SUBCASE("percentile(1, 99) sends the planted outliers to 0 and 1") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.4, 0.6);
    Volume v(Shape3{1, 10, 100});
    for (auto& x : v.values) x = u(rng);
    v.values[123] = -50.0;
    v.values[877] = 50.0;
    // Sort-based oracle for linear-interpolated percentiles.
    auto sorted = v.values;
    std::sort(sorted.begin(), sorted.end());
    auto pct = [&](double p) {
      const double pos = p / 100.0 * (sorted.size() - 1);
      const auto k = static_cast<std::size_t>(std::floor(pos));
      return sorted[k] + (pos - k) * (sorted[std::min(k + 1, sorted.size() - 1)] - sorted[k]);
    };
    const auto range = compute_range(v.values, NormMode::percentile(1, 99));
    CHECK(range.lo == pct(1));
    CHECK(range.hi == pct(99));
    CHECK(range.lo > 0.39);
    CHECK(range.hi < 0.61);
    const auto n = normalize_display(v, NormMode::percentile(1, 99));
    CHECK(n.values[123] == 0.0);
    CHECK(n.values[877] == 1.0);
    for (double x : n.values) REQUIRE((x >= 0.0 && x <= 1.0));
  }
  SUBCASE("mode parsing and errors") {
    CHECK(parse_norm_mode("global") == NormMode::global_minmax());
    CHECK(parse_norm_mode("per_frame") == NormMode::per_frame_minmax());
    CHECK(parse_norm_mode("percentile") == NormMode::percentile(1, 99));
    CHECK(parse_norm_mode("percentile:2:98") == NormMode::percentile(2, 98));
    CHECK(parse_norm_mode("fixed:0:0.01") == NormMode::fixed(0, 0.01));
    CHECK(parse_norm_mode(to_string(NormMode::fixed(0.1, 0.7))) == NormMode::fixed(0.1, 0.7));
    CHECK_THROWS_AS(parse_norm_mode("fixed:1:1"), ParameterError);
    CHECK_THROWS_AS(parse_norm_mode("percentile:99:1"), ParameterError);
    CHECK_THROWS_AS(parse_norm_mode("percentile:1:101"), ParameterError);
    CHECK_THROWS_AS(parse_norm_mode("fixed:a:1"), ParameterError);
    CHECK_THROWS_AS(parse_norm_mode("loud"), ParameterError);
    CHECK_THROWS_AS(compute_range(std::vector<double>{1.0}, NormMode::fixed(2, 1)), ParameterError);
  }
}

TEST_CASE("focus metrics") {
  SUBCASE("entropy") {
    CHECK(entropy(Volume(Shape3{2, 2, 2}, 1.0)) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
    CHECK(entropy(Volume(Shape3{2, 2, 2}, 1.0)) == doctest::Approx(2.0794).epsilon(1e-4));
    Volume delta(Shape3{2, 2, 2});
    delta.at(1, 0, 1) = 3.0;
    CHECK(entropy(delta) == 0.0);
    CHECK(entropy(Volume(Shape3{1, 1, 3}, std::vector<double>{0.5, 0.25, 0.25})) ==
          doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
    CHECK(entropy(Volume(Shape3{1, 1, 3}, std::vector<double>{0.5, 0.25, 0.25})) == doctest::Approx(1.0397).epsilon(1e-4));
    CHECK_THROWS_AS(entropy(Volume(Shape3{1, 2, 2})), ParameterError);
    CHECK_THROWS_AS(entropy(Volume(Shape3{1, 1, 2}, std::vector<double>{1.0, -0.1})), ParameterError);
  }
  SUBCASE("center of mass") {
    Volume delta(Shape3{2, 3, 4});
    delta.at(1, 2, 3) = 1.0;
    CHECK(center_of_mass(delta) == Vec3{1, 2, 3});
    const auto u = center_of_mass(Volume(Shape3{3, 3, 3}, 0.5));
    for (double c : u) CHECK(c == doctest::Approx(1.0).epsilon(1e-12));
    Volume two(Shape3{1, 1, 3});
    two.at(0, 0, 0) = 1.0;
    two.at(0, 0, 2) = 1.0;
    CHECK(center_of_mass(two) == Vec3{0, 0, 1});
    CHECK_THROWS_AS(center_of_mass(Volume(Shape3{1, 1, 3})), ParameterError);
  }
  SUBCASE("peak") {
    CHECK(peak(Volume(Shape3{1, 1, 4}, std::vector<double>{1, 1, 2, 0})) == doctest::Approx(0.5));
  }
  SUBCASE("metric names") {
    CHECK(parse_metric("entropy") == Metric::entropy);
    CHECK(parse_metric("center_of_mass") == Metric::center_of_mass);
    try {
      parse_metric("sharpness");
      FAIL("expected error");
    } catch (const ParameterError& e) {
      CHECK(std::string(e.what()).find("entropy, peak, center_of_mass") != std::string::npos);
    }
  }
}

TEST_CASE("stats_series") {
  TempDir dir;
  SynthParams p;
  p.steps = 8;
  p.blocks = 2;
  p.heads = 3;
  p.token_texts = {"cat", "ball"};
  p.latent = {4, 12, 20};
  p.sigma_start = 4.0;
  p.sigma_end = 1.0;
  p.moving = true;
  p.noise = 1e-3;
  p.dtype = DType::f32;
  const auto path = dir / "s.attn";
  const auto spec = make_synth_spec(p);
  synth_dump(path, spec);
  const auto store = AttentionStore::open(path);

  SUBCASE("entropy over steps decreases as sigma shrinks, matching direct computation") {
    const auto s = stats_series(*store, Selection{0}, Metric::entropy, Axis::steps);
    REQUIRE(s.points.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(s.points[i].index == i);
      if (i > 0) CHECK(s.points[i].value < s.points[i - 1].value);
      // Direct: average the raw rows by hand, then entropy.
      std::vector<double> acc(p.latent.size(), 0.0);
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t h = 0; h < 3; ++h) {
          const auto v = store->get_map(0, i, b, h);
          for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += v.values[k] / 6.0;
        }
      double sum = 0.0, ent = 0.0;
      for (double x : acc) sum += x;
      for (double x : acc) ent -= x / sum * std::log(x / sum);
      CHECK(s.points[i].value == doctest::Approx(ent).epsilon(1e-10));
    }
  }
  SUBCASE("rightward trajectory gives increasing x center of mass") {
    const auto s = stats_series(*store, Selection{1, AxisSel::mean(), AxisSel::single(0), AxisSel::mean()},
                                Metric::center_of_mass, Axis::steps);
    for (std::size_t i = 1; i < s.points.size(); ++i) CHECK(s.points[i].com[2] > s.points[i - 1].com[2]);
  }
  SUBCASE("series over heads and blocks cover the axis") {
    CHECK(stats_series(*store, Selection{0}, Metric::peak, Axis::heads).points.size() == 3);
    CHECK(stats_series(*store, Selection{0}, Metric::peak, Axis::blocks).points.size() == 2);
  }
  SUBCASE("single-step dump gives a series of length one") {
    p.steps = 1;
    synth_dump(dir / "one.attn", make_synth_spec(p));
    const auto one = AttentionStore::open(dir / "one.attn");
    CHECK(stats_series(*one, Selection{0}, Metric::entropy, Axis::steps).points.size() == 1);
  }
  SUBCASE("CSV and JSON export") {
    const auto e = stats_series(*store, Selection{0}, Metric::entropy, Axis::steps);
    const auto csv = e.to_csv();
    CHECK(csv.rfind("axis_index,value\n0,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
    const auto c = stats_series(*store, Selection{0}, Metric::center_of_mass, Axis::steps);
    CHECK(c.to_csv().rfind("axis_index,f,y,x\n", 0) == 0);
    const auto j = c.to_json();
    CHECK(j["metric"] == "center_of_mass");
    CHECK(j["axis"] == "steps");
    CHECK(j["points"][0]["value"].size() == 3);
    CHECK(e.to_json()["points"][3]["value"].is_number());
  }
}
