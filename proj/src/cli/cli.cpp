#include "attnscope/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "attnscope/attention_store.hpp"
#include "attnscope/error.hpp"
#include "attnscope/focus_stats.hpp"
#include "attnscope/render.hpp"
#include "attnscope/service/server.hpp"
#include "attnscope/synth.hpp"
#include "attnscope/validate.hpp"

namespace attnscope::cli {

namespace {

std::mutex g_server_mutex;
service::Server* g_server = nullptr;

void on_signal(int) { stop_serving(); }

struct TokenArgs {
  std::string text;
  long long index = -1;
};

void add_token_options(CLI::App* cmd, TokenArgs& t) {
  auto* text = cmd->add_option("--token-text", t.text, "Token by exact text (non-special tokens only)");
  auto* index = cmd->add_option("--token-index", t.index, "Token by zero-based index");
  text->excludes(index);
}

std::size_t resolve_token(const DumpHeader& h, const TokenArgs& t) {
  if (!t.text.empty()) return find_token(h, t.text);
  if (t.index < 0) throw ParameterError("one of --token-text or --token-index is required");
  if (static_cast<std::size_t>(t.index) >= h.dims.tokens) {
    throw BoundsError("token index " + std::to_string(t.index) + " out of range [0, " +
                      std::to_string(h.dims.tokens) + ")");
  }
  return static_cast<std::size_t>(t.index);
}

struct AxisArgs {
  std::string step = "mean";
  std::string block = "mean";
  std::string head = "mean";

  const std::string& on(Axis a) const { return a == Axis::steps ? step : a == Axis::blocks ? block : head; }
};

void add_axis_options(CLI::App* cmd, AxisArgs& a, const std::string& what) {
  cmd->add_option("--step", a.step, "Diffusion step " + what)->capture_default_str();
  cmd->add_option("--block", a.block, "Transformer block " + what)->capture_default_str();
  cmd->add_option("--head", a.head, "Attention head " + what)->capture_default_str();
}

Shape3 parse_shape(const std::string& text, const char* flag) {
  Shape3 s;
  char x1 = 0, x2 = 0;
  std::istringstream in(text);
  std::string rest;
  if (!(in >> s.frames >> x1 >> s.height >> x2 >> s.width) || x1 != 'x' || x2 != 'x' || (in >> rest)) {
    throw ParameterError(std::string(flag) + " expects FRAMESxHEIGHTxWIDTH, got '" + text + "'");
  }
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::shared_ptr<const AttentionStore> open_store(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path);
  return AttentionStore::open(path);
}

// --- subcommands -----------------------------------------------------------

struct ValidateArgs {
  std::string path;
  double tolerance = 1e-3;
  std::size_t max_report = 20;
  bool json = false;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  const auto store = open_store(a.path);
  ValidateOptions opt;
  opt.tolerance = a.tolerance;
  opt.max_reported = a.max_report;
  const auto report = validate_dump(*store, opt);
  if (a.json) {
    out << report.to_json().dump(2) << "\n";
  } else {
    out << report.to_text();
  }
  return report.ok() ? kExitOk : kExitDomain;
}

struct InfoArgs {
  std::string path;
  bool json = false;
};

int cmd_info(const InfoArgs& a, std::ostream& out) {
  const auto store = open_store(a.path);
  const auto& h = store->header();
  if (a.json) {
    out << header_to_json(h).dump(2) << "\n";
    return kExitOk;
  }
  const auto& d = h.dims;
  out << "file:         " << a.path << " (" << store->layout().file_bytes() << " bytes)\n"
      << "digest:       " << store->digest() << "\n"
      << "model:        " << h.model_id << "\n"
      << "prompt:       " << h.prompt << "\n";
  if (h.negative_prompt) out << "negative:     " << *h.negative_prompt << "\n";
  out << "dims:         steps=" << d.steps << " blocks=" << d.blocks << " heads=" << d.heads
      << " tokens=" << d.tokens << "\n"
      << "latent:       " << d.latent_frames << "x" << d.latent_h << "x" << d.latent_w << " ("
      << d.positions() << " positions)\n"
      << "output:       " << h.output_shape.frames << "x" << h.output_shape.height << "x" << h.output_shape.width
      << "\n"
      << "dtype:        " << to_string(h.dtype) << "\n"
      << "softmax:      " << (h.softmax_applied ? "yes" : "no") << "\n"
      << "cfg branch:   " << to_string(h.cfg_branch) << "\n"
      << "seed:         " << h.generation.seed << "\n"
      << "guidance:     " << h.generation.guidance_scale << "\n";
  if (h.generation.scheduler_name) out << "scheduler:    " << *h.generation.scheduler_name << "\n";
  out << "tokens:\n";
  for (const auto& t : h.tokens) {
    out << "  [" << t.index << "] " << t.text << (t.is_special ? "  (special)" : "") << "\n";
  }
  return kExitOk;
}

struct RenderArgs {
  std::string path;
  TokenArgs token;
  AxisArgs axes;
  std::string norm = "percentile:1:99";
  std::string cmap{kDefaultColormap};
  std::string overlay_dir;
  double alpha = 0.5;
  std::string mapping = "endpoint";
  std::string out;
  std::string name = "frame";
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const auto store = open_store(a.path);
  const auto& h = store->header();
  Selection sel;
  sel.token = resolve_token(h, a.token);
  for (Axis axis : {Axis::steps, Axis::blocks, Axis::heads}) {
    sel.on(axis) = parse_axis_sel(a.axes.on(axis), axis_extent(h.dims, axis));
    if (sel.on(axis).kind == AxisSel::Kind::all) {
      throw ParameterError("render needs a single volume; 'all' is not accepted for " +
                           std::string(to_string(axis)));
    }
  }
  RenderSpec r;
  r.norm = parse_norm_mode(a.norm);
  r.cmap = a.cmap;
  r.alpha = a.alpha;
  r.mapping = parse_grid_mapping(a.mapping);
  std::vector<RgbImage> base;
  if (!a.overlay_dir.empty()) base = load_png_sequence(a.overlay_dir);
  const auto frames = render_sequence(*store, sel, r, base);
  const auto files = export_png_sequence(frames, a.out, a.name);
  out << "token [" << sel.token << "] '" << h.tokens[sel.token].text << "' " << to_string(sel) << ": wrote "
      << files.size() << " frames to " << a.out << "\n";
  return kExitOk;
}

struct GridArgs {
  std::string path;
  TokenArgs token;
  AxisArgs axes;
  std::string axis;
  std::string rows;
  std::string frame = "0";
  std::size_t cols = 0;
  double scale = 0.25;
  std::size_t padding = 2;
  bool per_cell_range = false;
  std::string norm = "percentile:1:99";
  std::string cmap{kDefaultColormap};
  std::string mapping = "endpoint";
  std::string out;
};

int cmd_grid(const GridArgs& a, std::ostream& out) {
  const auto store = open_store(a.path);
  const auto& h = store->header();
  GridRequest base;
  base.axis = parse_axis(a.axis);
  if (!a.rows.empty()) base.row_axis = parse_axis(a.rows);
  base.sel.token = resolve_token(h, a.token);
  base.cols = a.cols;
  base.cell_scale = a.scale;
  base.padding = a.padding;
  base.shared_range = !a.per_cell_range;
  base.rspec.norm = parse_norm_mode(a.norm);
  base.rspec.cmap = a.cmap;
  base.rspec.mapping = parse_grid_mapping(a.mapping);
  const auto fsel = parse_axis_sel(a.frame, h.output_shape.frames);
  if (fsel.kind != AxisSel::Kind::single) throw ParameterError("--frame expects an index, first, middle or last");
  base.frame = fsel.index;

  // Fixed axes may list several values (e.g. --step first,middle,last); one
  // grid is written per value of the listed axis.
  std::optional<Axis> listed;
  std::vector<std::string> listed_values{""};
  for (Axis axis : {Axis::steps, Axis::blocks, Axis::heads}) {
    const bool varied = axis == base.axis || (base.row_axis && axis == *base.row_axis);
    auto values = split_list(a.axes.on(axis));
    if (values.empty()) throw ParameterError("empty value for --" + std::string(to_string(axis)));
    if (varied) continue;
    if (values.size() > 1) {
      if (listed) throw ParameterError("only one fixed axis may list several values");
      listed = axis;
      listed_values = values;
    } else {
      base.sel.on(axis) = parse_axis_sel(values.front(), axis_extent(h.dims, axis));
    }
  }
  std::filesystem::create_directories(a.out);
  for (const auto& value : listed_values) {
    GridRequest req = base;
    if (listed) req.sel.on(*listed) = parse_axis_sel(value, axis_extent(h.dims, *listed));
    for (Axis axis : {Axis::steps, Axis::blocks, Axis::heads}) {
      const bool varied = axis == req.axis || (req.row_axis && axis == *req.row_axis);
      if (varied) {
        req.sel.on(axis) = AxisSel::all();
      } else if (req.sel.on(axis).kind == AxisSel::Kind::all) {
        throw ParameterError("'all' is only valid for the grid axes");
      }
    }
    const auto img = render_grid(*store, req);
    std::ostringstream name;
    name << "grid_" << to_string(req.axis);
    if (req.row_axis) name << "_by_" << to_string(*req.row_axis);
    name << "_token" << req.sel.token << "_step-" << to_string(req.sel.steps) << "_block-"
         << to_string(req.sel.blocks) << "_head-" << to_string(req.sel.heads) << "_frame" << req.frame << ".png";
    const auto path = std::filesystem::path(a.out) / name.str();
    write_png(path, img);
    out << "wrote " << path.string() << " (" << img.width << "x" << img.height << ")\n";
  }
  return kExitOk;
}

struct StatsArgs {
  std::string path;
  TokenArgs token;
  AxisArgs axes;
  std::string metric = "entropy";
  std::string axis = "steps";
  bool csv = false;
  std::string out;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const auto axis = parse_axis(a.axis);
  const auto metric = parse_metric(a.metric);
  const auto store = open_store(a.path);
  const auto& h = store->header();
  Selection sel;
  sel.token = resolve_token(h, a.token);
  for (Axis other : {Axis::steps, Axis::blocks, Axis::heads}) {
    if (other == axis) continue;
    sel.on(other) = parse_axis_sel(a.axes.on(other), axis_extent(h.dims, other));
    if (sel.on(other).kind == AxisSel::Kind::all) throw ParameterError("'all' is only valid for the stats axis");
  }
  const auto series = stats_series(*store, sel, metric, axis);
  const std::string text = a.csv ? series.to_csv() : series.to_json().dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    std::ofstream f(a.out, std::ios::trunc);
    if (!(f << text)) throw IoError("cannot write " + a.out);
    out << "wrote " << series.points.size() << " points to " << a.out << "\n";
  }
  return kExitOk;
}

struct SynthArgs {
  std::string out;
  bool canonical = false;
  std::size_t steps = 4, blocks = 3, heads = 2;
  std::string tokens = "a,cat,</s>,<pad>";
  std::string latent = "3x6x8";
  std::string output = "13x48x64";
  std::string dtype = "f16";
  std::uint64_t seed = 0;
  double noise = 0.0;
  double sigma_start = 4.0;
  double sigma_end = 1.0;
  bool still = false;
  std::string prompt;
};

int cmd_synth(const SynthArgs& a, const CLI::App& cmd, std::ostream& out) {
  SynthParams p = a.canonical ? canonical_synth_params() : SynthParams{};
  auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
  if (!a.canonical || given("--steps")) p.steps = a.steps;
  if (!a.canonical || given("--blocks")) p.blocks = a.blocks;
  if (!a.canonical || given("--heads")) p.heads = a.heads;
  if (!a.canonical || given("--tokens")) p.token_texts = split_list(a.tokens);
  if (!a.canonical || given("--latent")) p.latent = parse_shape(a.latent, "--latent");
  if (!a.canonical || given("--output")) {
    const auto o = parse_shape(a.output, "--output");
    p.out_frames = o.frames;
    p.out_height = o.height;
    p.out_width = o.width;
  }
  if (!a.canonical || given("--dtype")) {
    if (a.dtype == "f16") {
      p.dtype = DType::f16;
    } else if (a.dtype == "f32") {
      p.dtype = DType::f32;
    } else {
      throw ParameterError("--dtype must be f16 or f32");
    }
  }
  if (!a.canonical || given("--seed")) p.seed = a.seed;
  if (!a.canonical || given("--noise")) p.noise = a.noise;
  if (!a.canonical || given("--sigma-start")) p.sigma_start = a.sigma_start;
  if (!a.canonical || given("--sigma-end")) p.sigma_end = a.sigma_end;
  if (given("--still")) p.moving = false;
  if (given("--prompt")) p.prompt = a.prompt;
  if (!(p.sigma_start > 0.0) || !(p.sigma_end > 0.0)) throw ParameterError("sigma must be > 0");
  const auto spec = make_synth_spec(p);
  synth_dump(a.out, spec);
  const auto& d = spec.header.dims;
  out << "wrote " << a.out << ": steps=" << d.steps << " blocks=" << d.blocks << " heads=" << d.heads
      << " tokens=" << d.tokens << " latent=" << d.latent_frames << "x" << d.latent_h << "x" << d.latent_w
      << " dtype=" << to_string(spec.header.dtype) << " seed=" << p.seed << "\n";
  return kExitOk;
}

struct ServeArgs {
  std::string path;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t cache_mb = 512;
  std::string cors_origin = "*";
  std::string static_dir;
  std::string overlay_dir;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  std::shared_ptr<const AttentionStore> store;
  if (!a.path.empty()) store = open_store(a.path);
  service::ServiceOptions opt;
  opt.host = a.host;
  opt.port = a.port;
  opt.cache_bytes = a.cache_mb << 20;
  opt.cors_origin = a.cors_origin;
  if (!a.static_dir.empty()) opt.static_dir = a.static_dir;
  if (!a.overlay_dir.empty()) opt.overlay_dir = a.overlay_dir;
  service::Server server(store, opt);
  const int port = server.bind();
  {
    std::lock_guard lock(g_server_mutex);
    g_server = &server;
  }
  auto previous_int = std::signal(SIGINT, on_signal);
  auto previous_term = std::signal(SIGTERM, on_signal);
  out << "serving " << (store ? a.path : std::string("(no dump)")) << " on http://" << a.host << ":" << port
      << std::endl;
  server.listen();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  {
    std::lock_guard lock(g_server_mutex);
    g_server = nullptr;
  }
  return kExitOk;
}

}  // namespace

void stop_serving() {
  std::lock_guard lock(g_server_mutex);
  if (g_server) g_server->stop();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"attnscope: inspect, render and serve cross-attention dumps", "attnscope"};
  app.set_config("--config", "", "Config file (TOML/INI key = value); flags override it");
  app.allow_config_extras(false);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Check chunk checksums and softmax rows");
  validate->add_option("path", va.path, "Dump file")->required();
  validate->add_option("--tolerance", va.tolerance, "Allowed |row sum - 1|")->capture_default_str();
  validate->add_option("--max-report", va.max_report, "Violations listed per kind")->capture_default_str();
  validate->add_flag("--json", va.json, "Emit the report as JSON");

  InfoArgs ia;
  auto* info = app.add_subcommand("info", "Print the dump header");
  info->add_option("path", ia.path, "Dump file")->required();
  info->add_flag("--json", ia.json, "Emit the header JSON verbatim");

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Render one token's heatmap sequence as PNG frames");
  render->add_option("path", ra.path, "Dump file")->required();
  add_token_options(render, ra.token);
  add_axis_options(render, ra.axes, "(index, mean, first, middle, last)");
  render->add_option("--norm", ra.norm, "global | per_frame | percentile:LO:HI | fixed:LO:HI")->capture_default_str();
  render->add_option("--cmap", ra.cmap, "Builtin colormap name or asset file")->capture_default_str();
  render->add_option("--overlay-dir", ra.overlay_dir, "Directory of base video PNG frames");
  render->add_option("--alpha", ra.alpha, "Heatmap weight when overlaying")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  render->add_option("--mapping", ra.mapping, "Upsampling grid mapping: endpoint | centered")->capture_default_str();
  render->add_option("--name", ra.name, "File name prefix")->capture_default_str();
  render->add_option("--out", ra.out, "Output directory")->required();

  GridArgs ga;
  auto* grid = app.add_subcommand("grid", "Compose per-step/block/head renders into grid images");
  grid->add_option("path", ga.path, "Dump file")->required();
  add_token_options(grid, ga.token);
  add_axis_options(grid, ga.axes, "for the fixed axes; comma lists write one grid each");
  grid->add_option("--axis", ga.axis, "Axis along the cells (columns): steps | blocks | heads")->required();
  grid->add_option("--rows", ga.rows, "Second axis along the rows, e.g. --axis heads --rows steps");
  grid->add_option("--frame", ga.frame, "Output frame (index, first, middle, last)")->capture_default_str();
  grid->add_option("--cols", ga.cols, "Columns (0 = ceil(sqrt(n)))")->capture_default_str();
  grid->add_option("--scale", ga.scale, "Cell size relative to the output frame")->capture_default_str();
  grid->add_option("--padding", ga.padding, "Padding pixels")->capture_default_str();
  grid->add_flag("--per-cell-range", ga.per_cell_range, "Normalize each cell on its own range");
  grid->add_option("--norm", ga.norm, "Normalization mode")->capture_default_str();
  grid->add_option("--cmap", ga.cmap, "Colormap")->capture_default_str();
  grid->add_option("--mapping", ga.mapping, "endpoint | centered")->capture_default_str();
  grid->add_option("--out", ga.out, "Output directory")->required();

  StatsArgs sa;
  auto* stats = app.add_subcommand("stats", "Focus statistics along one axis");
  stats->add_option("path", sa.path, "Dump file")->required();
  add_token_options(stats, sa.token);
  add_axis_options(stats, sa.axes, "for the non-series axes");
  stats->add_option("--metric", sa.metric, "entropy | peak | center_of_mass")->capture_default_str();
  stats->add_option("--axis", sa.axis, "steps | blocks | heads")->capture_default_str();
  stats->add_flag("--csv", sa.csv, "CSV instead of JSON");
  stats->add_option("--out", sa.out, "Write to file instead of stdout");

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic Gaussian-blob dump");
  synth->add_option("--out", ya.out, "Output dump file")->required();
  synth->add_flag("--canonical", ya.canonical,
                  "Start from the 25-step/30-block/12-head configuration (8 tokens, 4x15x26 latent)");
  synth->add_option("--steps", ya.steps)->capture_default_str();
  synth->add_option("--blocks", ya.blocks)->capture_default_str();
  synth->add_option("--heads", ya.heads)->capture_default_str();
  synth->add_option("--tokens", ya.tokens, "Comma-separated token texts; <...> marks special")->capture_default_str();
  synth->add_option("--latent", ya.latent, "Latent FxHxW")->capture_default_str();
  synth->add_option("--output", ya.output, "Output video FxHxW")->capture_default_str();
  synth->add_option("--dtype", ya.dtype, "f16 | f32")->capture_default_str();
  synth->add_option("--seed", ya.seed)->capture_default_str();
  synth->add_option("--noise", ya.noise, "Uniform noise amplitude")->capture_default_str();
  synth->add_option("--sigma-start", ya.sigma_start)->capture_default_str();
  synth->add_option("--sigma-end", ya.sigma_end)->capture_default_str();
  synth->add_flag("--still", ya.still, "Blobs do not move across steps");
  synth->add_option("--prompt", ya.prompt, "Prompt recorded in the header");

  ServeArgs va2;
  auto* serve = app.add_subcommand("serve", "Serve a dump over HTTP");
  serve->add_option("path", va2.path, "Dump file (omit to serve 503s)");
  serve->add_option("--host", va2.host)->envname("ATTNSCOPE_HOST")->capture_default_str();
  serve->add_option("--port", va2.port)->envname("ATTNSCOPE_PORT")->capture_default_str();
  serve->add_option("--cache-mb", va2.cache_mb, "Render cache size")->envname("ATTNSCOPE_CACHE_MB")->capture_default_str();
  serve->add_option("--cors-origin", va2.cors_origin)->envname("ATTNSCOPE_CORS_ORIGIN")->capture_default_str();
  serve->add_option("--static-dir", va2.static_dir, "Explorer static assets")->envname("ATTNSCOPE_STATIC_DIR");
  serve->add_option("--overlay-dir", va2.overlay_dir, "Base video PNG frames for overlays");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(va, out);
    if (info->parsed()) return cmd_info(ia, out);
    if (render->parsed()) return cmd_render(ra, out);
    if (grid->parsed()) return cmd_grid(ga, out);
    if (stats->parsed()) return cmd_stats(sa, out);
    if (synth->parsed()) return cmd_synth(ya, *synth, out);
    if (serve->parsed()) return cmd_serve(va2, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BoundsError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace attnscope::cli
