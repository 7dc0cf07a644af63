#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include "attnscope/dump_header.hpp"

namespace attnscope {

// ATTNDMP1 layout (all integers little-endian):
//   magic "ATTNDMP1" (8) | header_length u64 (8) | header UTF-8 JSON
//   | CRC32 table, one u32 per (step, block) chunk, step-major
//   | data chunks, step-major, each [head][token][position]
inline constexpr char kMagic[9] = "ATTNDMP1";
// Written in place of kMagic until finalize, so an interrupted writer leaves
// a file no reader will accept.
inline constexpr char kPartialMagic[9] = "ATTNPART";
inline constexpr std::size_t kPreambleBytes = 16;

/// Byte layout of a dump, derived purely from the header size and dims.
struct DumpLayout {
  std::size_t header_bytes = 0;
  std::size_t chunk_count = 0;
  std::size_t chunk_bytes = 0;
  std::size_t row_bytes = 0;
  std::size_t tokens = 0;

  std::size_t table_offset() const noexcept { return kPreambleBytes + header_bytes; }
  std::size_t data_offset() const noexcept { return table_offset() + 4 * chunk_count; }
  std::size_t file_bytes() const noexcept { return data_offset() + chunk_count * chunk_bytes; }
  std::size_t chunk_offset(std::size_t chunk) const noexcept {
    return data_offset() + chunk * chunk_bytes;
  }
  std::size_t row_offset(std::size_t chunk, std::size_t head, std::size_t token) const noexcept {
    return chunk_offset(chunk) + (head * tokens + token) * row_bytes;
  }
};

DumpLayout make_layout(const DumpHeader& header, std::size_t header_bytes);

/// Serialized header bytes exactly as written to the file.
std::string encode_header(const DumpHeader& header);

std::uint32_t crc32(std::span<const std::byte> bytes) noexcept;

/// Streaming writer. Holds no chunk data: each chunk goes straight to disk and
/// only its CRC is kept until finalize() back-fills the table and the magic.
class DumpWriter {
 public:
  DumpWriter(const std::filesystem::path& path, DumpHeader header);
  ~DumpWriter();

  DumpWriter(const DumpWriter&) = delete;
  DumpWriter& operator=(const DumpWriter&) = delete;

  /// Chunks must arrive step-major, block-minor, each exactly chunk_bytes long.
  void write_chunk(std::size_t step, std::size_t block, std::span<const std::byte> chunk);
  void finalize();

  const DumpHeader& header() const noexcept { return header_; }
  std::size_t chunks_written() const noexcept { return next_; }

 private:
  std::filesystem::path path_;
  DumpHeader header_;
  DumpLayout layout_;
  std::FILE* file_ = nullptr;
  std::vector<std::uint32_t> crcs_;
  std::size_t next_ = 0;
  bool finalized_ = false;
};

/// Producer callback: fills `out` (chunk_bytes long) for chunk (step, block).
using ChunkProducer =
    std::function<void(std::size_t step, std::size_t block, std::span<std::byte> out)>;

/// Convenience wrapper: writes every chunk in order via the producer, reusing a
/// single chunk-sized buffer.
void write_dump(const std::filesystem::path& path, const DumpHeader& header,
                const ChunkProducer& produce);

/// Encodes decoded values into the header's dtype, appending to `out`.
void encode_values(DType dtype, std::span<const float> values, std::span<std::byte> out);

}  // namespace attnscope
