#include "attnscope/service/render_cache.hpp"

namespace attnscope::service {

RenderCache::Blob RenderCache::get(const std::string& key) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    ++counters_.misses;
    return nullptr;
  }
  ++counters_.hits;
  order_.splice(order_.begin(), order_, it->second.position);
  return it->second.blob;
}

RenderCache::Blob RenderCache::put(const std::string& key, Blob blob) {
  if (!blob) return blob;
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) {
    order_.splice(order_.begin(), order_, it->second.position);
    return it->second.blob;
  }
  if (blob->size() > capacity_) return blob;
  while (bytes_ + blob->size() > capacity_ && !order_.empty()) {
    auto victim = entries_.find(order_.back());
    bytes_ -= victim->second.blob->size();
    entries_.erase(victim);
    order_.pop_back();
    ++counters_.evictions;
  }
  order_.push_front(key);
  entries_.emplace(key, Entry{blob, order_.begin()});
  bytes_ += blob->size();
  return blob;
}

RenderCache::Stats RenderCache::stats() const {
  std::lock_guard lock(mutex_);
  Stats s = counters_;
  s.entries = entries_.size();
  s.bytes = bytes_;
  return s;
}

}  // namespace attnscope::service
