#include "attnscope/dump_file.hpp"

#include <bit>
#include <cstring>
#include <vector>

#include <zlib.h>

#include "attnscope/error.hpp"
#include "attnscope/half.hpp"

static_assert(std::endian::native == std::endian::little,
              "ATTNDMP1 readers and writers assume a little-endian host");

namespace attnscope {

DumpLayout make_layout(const DumpHeader& header, std::size_t header_bytes) {
  DumpLayout l;
  l.header_bytes = header_bytes;
  l.chunk_count = header.chunk_count();
  l.chunk_bytes = header.chunk_bytes();
  l.row_bytes = header.row_bytes();
  l.tokens = header.dims.tokens;
  return l;
}

std::string encode_header(const DumpHeader& header) { return header_to_json(header).dump(); }

std::uint32_t crc32(std::span<const std::byte> bytes) noexcept {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large spans in pieces.
  constexpr std::size_t kStep = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kStep) {
    const std::size_t n = std::min(kStep, bytes.size() - off);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

void write_all(std::FILE* f, const void* data, std::size_t n, const std::filesystem::path& path) {
  if (n != 0 && std::fwrite(data, 1, n, f) != n) {
    throw IoError("write failed: " + path.string());
  }
}

void write_u64(std::FILE* f, std::uint64_t v, const std::filesystem::path& path) {
  write_all(f, &v, sizeof v, path);
}

}  // namespace

DumpWriter::DumpWriter(const std::filesystem::path& path, DumpHeader header)
    : path_(path), header_(std::move(header)) {
  check_header(header_);
  const std::string hdr = encode_header(header_);
  layout_ = make_layout(header_, hdr.size());
  file_ = std::fopen(path_.string().c_str(), "wb");
  if (!file_) throw IoError("cannot open for writing: " + path_.string());
  write_all(file_, kPartialMagic, 8, path_);
  write_u64(file_, hdr.size(), path_);
  write_all(file_, hdr.data(), hdr.size(), path_);
  const std::vector<std::uint32_t> placeholder(layout_.chunk_count, 0u);
  write_all(file_, placeholder.data(), placeholder.size() * 4, path_);
  crcs_.reserve(layout_.chunk_count);
}

DumpWriter::~DumpWriter() {
  if (file_) std::fclose(file_);
}

void DumpWriter::write_chunk(std::size_t step, std::size_t block,
                             std::span<const std::byte> chunk) {
  if (finalized_) throw SequencingError("write_chunk after finalize");
  if (chunk.size() != layout_.chunk_bytes) {
    throw FormatError("chunk (" + std::to_string(step) + ", " + std::to_string(block) + ") has " +
                      std::to_string(chunk.size()) + " bytes, expected " +
                      std::to_string(layout_.chunk_bytes));
  }
  if (next_ >= layout_.chunk_count) {
    throw SequencingError("more chunks than steps x blocks");
  }
  const std::size_t want_step = next_ / header_.dims.blocks;
  const std::size_t want_block = next_ % header_.dims.blocks;
  if (step != want_step || block != want_block) {
    throw SequencingError("out-of-order chunk (" + std::to_string(step) + ", " +
                          std::to_string(block) + "), expected (" + std::to_string(want_step) +
                          ", " + std::to_string(want_block) + ")");
  }
  write_all(file_, chunk.data(), chunk.size(), path_);
  crcs_.push_back(crc32(chunk));
  ++next_;
}

void DumpWriter::finalize() {
  if (finalized_) return;
  if (next_ != layout_.chunk_count) {
    throw SequencingError("finalize after " + std::to_string(next_) + " of " +
                          std::to_string(layout_.chunk_count) + " chunks");
  }
  if (std::fseek(file_, static_cast<long>(layout_.table_offset()), SEEK_SET) != 0) {
    throw IoError("seek failed: " + path_.string());
  }
  write_all(file_, crcs_.data(), crcs_.size() * 4, path_);
  if (std::fflush(file_) != 0 || std::fseek(file_, 0, SEEK_SET) != 0) {
    throw IoError("flush failed: " + path_.string());
  }
  write_all(file_, kMagic, 8, path_);
  if (std::fclose(file_) != 0) {
    file_ = nullptr;
    throw IoError("close failed: " + path_.string());
  }
  file_ = nullptr;
  finalized_ = true;
}

void write_dump(const std::filesystem::path& path, const DumpHeader& header,
                const ChunkProducer& produce) {
  DumpWriter writer(path, header);
  std::vector<std::byte> buffer(header.chunk_bytes());
  for (std::size_t s = 0; s < header.dims.steps; ++s) {
    for (std::size_t b = 0; b < header.dims.blocks; ++b) {
      produce(s, b, buffer);
      writer.write_chunk(s, b, buffer);
    }
  }
  writer.finalize();
}

void encode_values(DType dtype, std::span<const float> values, std::span<std::byte> out) {
  if (out.size() != values.size() * element_size(dtype)) {
    throw ParameterError("encode_values: output span has wrong size");
  }
  if (dtype == DType::f32) {
    std::memcpy(out.data(), values.data(), out.size());
    return;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint16_t h = float_to_half(values[i]);
    std::memcpy(out.data() + 2 * i, &h, 2);
  }
}

}  // namespace attnscope
