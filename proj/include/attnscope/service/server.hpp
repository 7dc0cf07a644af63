#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "attnscope/attention_store.hpp"

namespace attnscope::service {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;                          // 0 binds any free port
  std::size_t cache_bytes = 512ull << 20;
  std::string cors_origin = "*";
  std::optional<std::filesystem::path> static_dir;   // explorer assets
  std::optional<std::filesystem::path> overlay_dir;  // base video frames for alpha overlays
};

/// Read-only HTTP facade over one AttentionStore:
///   GET /api/meta   header JSON
///   GET /api/frame  one rendered output frame as PNG (ETag / If-None-Match)
///   GET /api/grid   composed grid PNG over one or two axes
///   GET /api/stats  StatsSeries JSON
/// A null store makes every /api route answer 503.
class Server {
 public:
  Server(std::shared_ptr<const AttentionStore> store, ServiceOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket; returns the bound port. Throws IoError on failure.
  int bind();
  /// Serves until stop(). Call bind() first.
  void listen();
  void stop();
  bool running() const;

  std::size_t cache_entries() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace attnscope::service
