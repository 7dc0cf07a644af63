#include "attnscope/attention_store.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstring>

#include "attnscope/error.hpp"
#include "attnscope/half.hpp"

namespace attnscope {

MappedFile::MappedFile(const std::filesystem::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw IoError("cannot stat " + path.string());
  }
  size_ = static_cast<std::size_t>(st.st_size);
  if (size_ > 0) {
    void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      throw IoError("cannot map " + path.string() + ": " + std::strerror(errno));
    }
    data_ = static_cast<const std::byte*>(p);
  }
  ::close(fd);
}

MappedFile::~MappedFile() {
  if (data_) ::munmap(const_cast<std::byte*>(data_), size_);
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint8_t>(b);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

void decode_values(DType dtype, std::span<const std::byte> bytes, std::span<double> out) {
  if (dtype == DType::f32) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      float f;
      std::memcpy(&f, bytes.data() + 4 * i, 4);
      out[i] = f;
    }
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint16_t h;
      std::memcpy(&h, bytes.data() + 2 * i, 2);
      out[i] = half_to_float(h);
    }
  }
}

std::shared_ptr<const AttentionStore> AttentionStore::open(const std::filesystem::path& path) {
  return open(path, Options{});
}

std::shared_ptr<const AttentionStore> AttentionStore::open(const std::filesystem::path& path,
                                                           Options options) {
  return std::shared_ptr<const AttentionStore>(new AttentionStore(path, options));
}

AttentionStore::AttentionStore(const std::filesystem::path& path, Options options)
    : path_(path), options_(options), file_(path) {
  const auto bytes = file_.bytes();
  if (bytes.size() < kPreambleBytes) {
    throw BadMagicError(path.string() + ": file too short for an ATTNDMP1 preamble");
  }
  if (std::memcmp(bytes.data(), kPartialMagic, 8) == 0) {
    throw BadMagicError(path.string() + ": incomplete dump (writer never finalized)");
  }
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw BadMagicError(path.string() + ": bad magic, not an ATTNDMP1 file");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - kPreambleBytes) {
    throw MalformedHeaderError(path.string() + ": header length " + std::to_string(header_len) +
                               " runs past end of file");
  }
  const auto* hdr_begin = reinterpret_cast<const char*>(bytes.data() + kPreambleBytes);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(hdr_begin, hdr_begin + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeaderError(path.string() + ": header is not valid JSON: " + e.what());
  }
  try {
    header_ = header_from_json(j);
  } catch (const FormatError& e) {
    throw MalformedHeaderError(path.string() + ": " + e.what());
  }
  layout_ = make_layout(header_, static_cast<std::size_t>(header_len));
  if (layout_.file_bytes() != bytes.size()) {
    throw SizeMismatchError(path.string() + ": expected " + std::to_string(layout_.file_bytes()) +
                            " bytes from header dims, found " + std::to_string(bytes.size()));
  }
  chunk_state_ = std::make_unique<std::atomic<std::uint8_t>[]>(layout_.chunk_count);
  for (std::size_t i = 0; i < layout_.chunk_count; ++i) chunk_state_[i].store(kUnchecked);

  const auto covered = bytes.subspan(kPreambleBytes, layout_.data_offset() - kPreambleBytes);
  digest_ = hex64(fnv1a64(covered));
}

void AttentionStore::check_ordinals(std::size_t token, std::size_t step, std::size_t block,
                                    std::size_t head) const {
  const auto& d = header_.dims;
  auto fail = [](const char* axis, std::size_t v, std::size_t n) {
    throw BoundsError(std::string(axis) + " " + std::to_string(v) + " out of range [0, " +
                      std::to_string(n) + ")");
  };
  if (token >= d.tokens) fail("token", token, d.tokens);
  if (step >= d.steps) fail("step", step, d.steps);
  if (block >= d.blocks) fail("block", block, d.blocks);
  if (head >= d.heads) fail("head", head, d.heads);
}

std::span<const std::byte> AttentionStore::chunk_bytes(std::size_t chunk) const {
  if (chunk >= layout_.chunk_count) {
    throw BoundsError("chunk " + std::to_string(chunk) + " out of range");
  }
  return file_.bytes().subspan(layout_.chunk_offset(chunk), layout_.chunk_bytes);
}

std::uint32_t AttentionStore::stored_crc(std::size_t chunk) const {
  if (chunk >= layout_.chunk_count) {
    throw BoundsError("chunk " + std::to_string(chunk) + " out of range");
  }
  std::uint32_t crc;
  std::memcpy(&crc, file_.bytes().data() + layout_.table_offset() + 4 * chunk, 4);
  return crc;
}

bool AttentionStore::chunk_crc_ok(std::size_t chunk) const {
  return crc32(chunk_bytes(chunk)) == stored_crc(chunk);
}

void AttentionStore::ensure_verified(std::size_t chunk, std::size_t step,
                                     std::size_t block) const {
  auto state = chunk_state_[chunk].load(std::memory_order_acquire);
  if (state == kUnchecked) {
    // Racing readers may both hash the chunk; they reach the same verdict.
    state = chunk_crc_ok(chunk) ? kGood : kBad;
    chunk_state_[chunk].store(state, std::memory_order_release);
  }
  if (state == kBad) {
    throw IntegrityError("checksum mismatch in chunk (step " + std::to_string(step) + ", block " +
                         std::to_string(block) + ") of " + path_.string());
  }
}

std::span<const std::byte> AttentionStore::row_bytes(std::size_t token, std::size_t step,
                                                     std::size_t block, std::size_t head) const {
  check_ordinals(token, step, block, head);
  const std::size_t chunk = step * header_.dims.blocks + block;
  if (options_.verify_on_read) ensure_verified(chunk, step, block);
  return file_.bytes().subspan(layout_.row_offset(chunk, head, token), layout_.row_bytes);
}

LatentVolume AttentionStore::get_map(std::size_t token, std::size_t step, std::size_t block,
                                     std::size_t head) const {
  LatentVolume v(latent_shape());
  decode_values(header_.dtype, row_bytes(token, step, block, head), v.values);
  return v;
}

void AttentionStore::accumulate_map(std::size_t token, std::size_t step, std::size_t block,
                                    std::size_t head, std::span<double> acc) const {
  const auto row = row_bytes(token, step, block, head);
  const std::size_t n = header_.dims.positions();
  if (acc.size() != n) throw ParameterError("accumulate_map: accumulator size mismatch");
  if (header_.dtype == DType::f32) {
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, row.data() + 4 * i, 4);
      acc[i] += f;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint16_t h;
      std::memcpy(&h, row.data() + 2 * i, 2);
      acc[i] += half_to_float(h);
    }
  }
}

}  // namespace attnscope
