#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "attnscope/dump_file.hpp"
#include "attnscope/dump_header.hpp"
#include "attnscope/volume.hpp"

namespace attnscope {

/// Read-only memory map of a whole file.
class MappedFile {
 public:
  explicit MappedFile(const std::filesystem::path& path);
  ~MappedFile();
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;

  std::span<const std::byte> bytes() const noexcept { return {data_, size_}; }

 private:
  const std::byte* data_ = nullptr;
  std::size_t size_ = 0;
};

/// Random-access view of an ATTNDMP1 file. Immutable after open apart from the
/// lazily filled checksum cache, which is atomic, so concurrent readers need
/// no locking.
class AttentionStore {
 public:
  struct Options {
    // Verify a chunk's CRC the first time any row in it is read.
    bool verify_on_read = true;
  };

  static std::shared_ptr<const AttentionStore> open(const std::filesystem::path& path);
  static std::shared_ptr<const AttentionStore> open(const std::filesystem::path& path,
                                                    Options options);

  const DumpHeader& header() const noexcept { return header_; }
  const DumpLayout& layout() const noexcept { return layout_; }
  const std::filesystem::path& path() const noexcept { return path_; }
  Shape3 latent_shape() const noexcept {
    return {header_.dims.latent_frames, header_.dims.latent_h, header_.dims.latent_w};
  }

  /// Raw bytes of the (head, token) row in chunk (step, block).
  std::span<const std::byte> row_bytes(std::size_t token, std::size_t step, std::size_t block,
                                       std::size_t head) const;
  std::span<const std::byte> chunk_bytes(std::size_t chunk) const;
  std::uint32_t stored_crc(std::size_t chunk) const;

  /// Decoded latent volume for one (step, block, head, token).
  LatentVolume get_map(std::size_t token, std::size_t step, std::size_t block,
                       std::size_t head) const;
  /// Adds the decoded row to `acc` elementwise (acc.size() == positions).
  void accumulate_map(std::size_t token, std::size_t step, std::size_t block, std::size_t head,
                      std::span<double> acc) const;

  /// Checks the CRC of a chunk regardless of cache state.
  bool chunk_crc_ok(std::size_t chunk) const;

  /// Hex digest identifying the dump content: covers the header and the CRC
  /// table, which itself covers every data byte.
  const std::string& digest() const noexcept { return digest_; }

 private:
  AttentionStore(const std::filesystem::path& path, Options options);
  void ensure_verified(std::size_t chunk, std::size_t step, std::size_t block) const;
  void check_ordinals(std::size_t token, std::size_t step, std::size_t block,
                      std::size_t head) const;

  enum : std::uint8_t { kUnchecked = 0, kGood = 1, kBad = 2 };

  std::filesystem::path path_;
  Options options_;
  MappedFile file_;
  DumpHeader header_;
  DumpLayout layout_;
  std::string digest_;
  mutable std::unique_ptr<std::atomic<std::uint8_t>[]> chunk_state_;
};

/// Decodes `bytes` (dtype elements) into doubles.
void decode_values(DType dtype, std::span<const std::byte> bytes, std::span<double> out);

/// 64-bit FNV-1a, hex-encoded. Stable across platforms; used for digests and ETags.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ull) noexcept;
std::string hex64(std::uint64_t value);

}  // namespace attnscope
