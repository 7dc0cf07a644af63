#include "attnscope/service/server.hpp"

#include <httplib.h>

#include <map>
#include <mutex>
#include <sstream>

#include "attnscope/error.hpp"
#include "attnscope/focus_stats.hpp"
#include "attnscope/render.hpp"
#include "attnscope/service/render_cache.hpp"

namespace attnscope::service {

namespace {

/// Maps a request failure onto an HTTP status.
struct HttpError : std::runtime_error {
  HttpError(int s, const std::string& m) : std::runtime_error(m), status(s) {}
  int status;
};

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"code", status}, {"message", message}}.dump(), "application/json");
}

std::string param(const httplib::Request& req, const char* name, const std::string& fallback) {
  return req.has_param(name) ? req.get_param_value(name) : fallback;
}

std::string required(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) throw HttpError(400, std::string("missing query parameter '") + name + "'");
  return req.get_param_value(name);
}

std::size_t parse_count(const std::string& text, const char* name) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (text.empty() || pos != text.size() || text[0] == '-') {
    throw HttpError(400, std::string("parameter '") + name + "' must be a non-negative integer, got '" +
                             text + "'");
  }
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& text, const char* name) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (text.empty() || pos != text.size()) {
    throw HttpError(400, std::string("parameter '") + name + "' must be a number, got '" + text + "'");
  }
  return v;
}

bool parse_flag(const std::string& text, const char* name) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw HttpError(400, std::string("parameter '") + name + "' must be true or false");
}

}  // namespace

struct Server::Impl {
  std::shared_ptr<const AttentionStore> store;
  ServiceOptions options;
  httplib::Server http;
  RenderCache cache;
  std::vector<RgbImage> base_frames;

  std::mutex range_mutex;
  std::map<std::string, std::optional<DisplayRange>> ranges;

  int bound_port = -1;

  Impl(std::shared_ptr<const AttentionStore> s, ServiceOptions o)
      : store(std::move(s)), options(std::move(o)), cache(options.cache_bytes) {
    if (store && options.overlay_dir) {
      base_frames = load_png_sequence(*options.overlay_dir);
      const auto& out = store->header().output_shape;
      if (base_frames.size() != out.frames) {
        throw ParameterError("overlay directory holds " + std::to_string(base_frames.size()) +
                             " PNG frames, dump expects " + std::to_string(out.frames));
      }
      for (const auto& f : base_frames) {
        if (f.width != out.width || f.height != out.height) {
          throw ParameterError("overlay frames must be " + std::to_string(out.width) + "x" +
                               std::to_string(out.height));
        }
      }
    }
    routes();
  }

  const AttentionStore& require_store() const {
    if (!store) throw HttpError(503, "no dump loaded; start the service with a dump path");
    return *store;
  }

  // Runs a handler, translating library errors into JSON error bodies.
  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      try {
        (this->*f)(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.what());
      } catch (const BoundsError& e) {
        send_error(res, 404, e.what());
      } catch (const ParameterError& e) {
        send_error(res, 400, e.what());
      } catch (const IntegrityError& e) {
        send_error(res, 500, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void routes() {
    http.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                              {"Access-Control-Expose-Headers", "ETag, X-Dump-Digest"}});
    http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "If-None-Match");
      res.status = 204;
    });
    http.Get("/api/meta", guarded(&Impl::meta));
    http.Get("/api/frame", guarded(&Impl::frame));
    http.Get("/api/grid", guarded(&Impl::grid));
    http.Get("/api/stats", guarded(&Impl::stats));
    if (options.static_dir) http.set_mount_point("/", options.static_dir->string());
  }

  std::size_t parse_token(const httplib::Request& req) const {
    const auto& h = store->header();
    const auto text = required(req, "token");
    if (!text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const auto index = parse_count(text, "token");
      if (index >= h.dims.tokens) {
        throw HttpError(404, "token " + text + " out of range [0, " + std::to_string(h.dims.tokens) + ")");
      }
      return index;
    }
    try {
      return find_token(h, text);
    } catch (const ParameterError& e) {
      throw HttpError(404, e.what());
    }
  }

  // step/block/head parameters; "all" is only legal where the caller overrides it.
  Selection parse_fixed(const httplib::Request& req, std::size_t token, bool allow_all) const {
    const auto& d = store->header().dims;
    Selection sel;
    sel.token = token;
    const std::pair<const char*, Axis> names[] = {{"step", Axis::steps}, {"block", Axis::blocks}, {"head", Axis::heads}};
    for (const auto& [name, axis] : names) {
      sel.on(axis) = parse_axis_sel(param(req, name, "mean"), axis_extent(d, axis));
      if (!allow_all && sel.on(axis).kind == AxisSel::Kind::all) {
        throw HttpError(400, std::string("'all' is not valid for ") + name + " here");
      }
    }
    return sel;
  }

  RenderSpec parse_render_spec(const httplib::Request& req) const {
    RenderSpec r;
    r.norm = parse_norm_mode(param(req, "norm", "percentile:1:99"));
    r.cmap = param(req, "cmap", std::string(kDefaultColormap));
    const auto builtins = builtin_colormap_names();
    if (std::find(builtins.begin(), builtins.end(), r.cmap) == builtins.end()) {
      throw HttpError(400, "unknown cmap '" + r.cmap + "'");
    }
    r.alpha = parse_real(param(req, "alpha", "0.5"), "alpha");
    if (!(r.alpha >= 0.0 && r.alpha <= 1.0)) throw HttpError(400, "alpha must lie in [0, 1]");
    r.mapping = parse_grid_mapping(param(req, "mapping", "endpoint"));
    return r;
  }

  std::string etag_for(const std::string& canonical) const {
    const std::string keyed = store->digest() + "|" + canonical;
    return "\"" + hex64(fnv1a64(std::as_bytes(std::span(keyed.data(), keyed.size())))) + "\"";
  }

  // Serves `canonical` from cache or renders it; honors If-None-Match.
  template <typename Render>
  void respond_png(const httplib::Request& req, httplib::Response& res, const std::string& canonical,
                   Render render) {
    const auto etag = etag_for(canonical);
    res.set_header("ETag", etag);
    res.set_header("Cache-Control", "no-cache");
    if (req.has_header("If-None-Match") && req.get_header_value("If-None-Match") == etag) {
      res.status = 304;
      return;
    }
    auto blob = cache.get(etag);
    if (!blob) {
      const auto png = encode_png(render());
      blob = cache.put(etag, std::make_shared<const std::string>(png.begin(), png.end()));
    }
    res.status = 200;
    res.set_content(*blob, "image/png");
  }

  std::optional<DisplayRange> range_for(const Selection& sel, const Volume& latent, const RenderSpec& r) {
    if (r.norm.kind == NormMode::Kind::per_frame_minmax) return std::nullopt;
    const std::string key = to_string(sel) + "|" + to_string(r.norm) + "|" + std::string(to_string(r.mapping));
    {
      std::lock_guard lock(range_mutex);
      if (auto it = ranges.find(key); it != ranges.end()) return it->second;
    }
    const auto& o = store->header().output_shape;
    auto range = sequence_range(upsample_trilinear(latent, {o.frames, o.height, o.width}, r.mapping), r.norm);
    std::lock_guard lock(range_mutex);
    if (ranges.size() > 4096) ranges.clear();
    ranges.emplace(key, range);
    return range;
  }

  void meta(const httplib::Request&, httplib::Response& res) {
    const auto& s = require_store();
    res.set_header("X-Dump-Digest", s.digest());
    res.set_content(header_to_json(s.header()).dump(), "application/json");
  }

  void frame(const httplib::Request& req, httplib::Response& res) {
    const auto& s = require_store();
    const auto& o = s.header().output_shape;
    const auto sel = parse_fixed(req, parse_token(req), false);
    const auto f = parse_count(param(req, "frame", "0"), "frame");
    if (f >= o.frames) {
      throw HttpError(404, "frame " + std::to_string(f) + " out of range [0, " + std::to_string(o.frames) + ")");
    }
    const auto r = parse_render_spec(req);
    const bool with_overlay = !base_frames.empty() && r.alpha > 0.0;
    std::ostringstream canonical;
    canonical << "frame|" << to_string(sel) << "|frame=" << f << "|norm=" << to_string(r.norm)
              << "|cmap=" << r.cmap << "|mapping=" << to_string(r.mapping);
    if (with_overlay) canonical << "|alpha=" << r.alpha;
    respond_png(req, res, canonical.str(), [&] {
      const auto latent = resolve_one(s, sel);
      const auto range = range_for(sel, latent, r);
      return render_frame(latent, {o.frames, o.height, o.width}, f, range, get_colormap(r.cmap), r.mapping,
                          with_overlay ? &base_frames[f] : nullptr, r.alpha);
    });
  }

  void grid(const httplib::Request& req, httplib::Response& res) {
    const auto& s = require_store();
    const auto& h = s.header();
    GridRequest g;
    g.axis = parse_axis(required(req, "axis"));
    if (req.has_param("rows")) g.row_axis = parse_axis(req.get_param_value("rows"));
    g.sel = parse_fixed(req, parse_token(req), true);
    for (Axis a : {Axis::steps, Axis::blocks, Axis::heads}) {
      const bool varied = a == g.axis || (g.row_axis && a == *g.row_axis);
      if (!varied && g.sel.on(a).kind == AxisSel::Kind::all) {
        throw HttpError(400, std::string("'all' is only valid for the grid axes; got it for ") +
                                 std::string(to_string(a)));
      }
    }
    g.frame = parse_count(param(req, "frame", "0"), "frame");
    if (g.frame >= h.output_shape.frames) {
      throw HttpError(404, "frame " + std::to_string(g.frame) + " out of range [0, " +
                               std::to_string(h.output_shape.frames) + ")");
    }
    g.cols = parse_count(param(req, "cols", "0"), "cols");
    g.cell_scale = parse_real(param(req, "scale", "0.25"), "scale");
    g.padding = parse_count(param(req, "padding", "2"), "padding");
    g.shared_range = parse_flag(param(req, "shared", "true"), "shared");
    g.rspec = parse_render_spec(req);
    // The varied axes are overridden during rendering; keep them out of the key.
    Selection keyed = g.sel;
    keyed.on(g.axis) = AxisSel::all();
    if (g.row_axis) keyed.on(*g.row_axis) = AxisSel::all();
    std::ostringstream canonical;
    canonical << "grid|" << to_string(keyed) << "|axis=" << to_string(g.axis)
              << "|rows=" << (g.row_axis ? to_string(*g.row_axis) : "-") << "|frame=" << g.frame
              << "|cols=" << g.cols << "|scale=" << g.cell_scale << "|padding=" << g.padding
              << "|shared=" << g.shared_range << "|norm=" << to_string(g.rspec.norm) << "|cmap=" << g.rspec.cmap
              << "|mapping=" << to_string(g.rspec.mapping);
    respond_png(req, res, canonical.str(), [&] { return render_grid(s, g); });
  }

  void stats(const httplib::Request& req, httplib::Response& res) {
    const auto& s = require_store();
    const auto metric = parse_metric(required(req, "metric"));
    const auto axis = parse_axis(required(req, "axis"));
    auto sel = parse_fixed(req, parse_token(req), true);
    for (Axis a : {Axis::steps, Axis::blocks, Axis::heads}) {
      if (a != axis && sel.on(a).kind == AxisSel::Kind::all) {
        throw HttpError(400, "'all' is only valid for the stats axis");
      }
    }
    res.set_content(stats_series(s, sel, metric, axis).to_json().dump(), "application/json");
  }
};

Server::Server(std::shared_ptr<const AttentionStore> store, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(store), std::move(options))) {}

Server::~Server() { stop(); }

int Server::bind() {
  auto& i = *impl_;
  if (i.options.port == 0) {
    i.bound_port = i.http.bind_to_any_port(i.options.host);
  } else {
    i.bound_port = i.http.bind_to_port(i.options.host, i.options.port) ? i.options.port : -1;
  }
  if (i.bound_port < 0) {
    throw IoError("cannot bind " + i.options.host + ":" + std::to_string(i.options.port));
  }
  return i.bound_port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

std::size_t Server::cache_entries() const { return impl_->cache.stats().entries; }

}  // namespace attnscope::service
