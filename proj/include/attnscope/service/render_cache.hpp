#pragma once

#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

namespace attnscope::service {

/// Thread-safe LRU of immutable byte blobs, bounded by total payload bytes.
/// Entries larger than the capacity are not cached.
class RenderCache {
 public:
  using Blob = std::shared_ptr<const std::string>;

  explicit RenderCache(std::size_t capacity_bytes) : capacity_(capacity_bytes) {}

  Blob get(const std::string& key);
  /// Inserts unless present; returns the cached blob (the existing one on a race).
  Blob put(const std::string& key, Blob blob);

  struct Stats {
    std::size_t entries = 0;
    std::size_t bytes = 0;
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t evictions = 0;
  };
  Stats stats() const;
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  using Order = std::list<std::string>;
  struct Entry {
    Blob blob;
    Order::iterator position;
  };

  mutable std::mutex mutex_;
  std::size_t capacity_;
  std::size_t bytes_ = 0;
  Order order_;  // front = most recently used
  std::unordered_map<std::string, Entry> entries_;
  Stats counters_;
};

}  // namespace attnscope::service
