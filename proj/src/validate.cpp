#include "attnscope/validate.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

namespace attnscope {

std::string_view to_string(RowViolation::Kind kind) noexcept {
  switch (kind) {
    case RowViolation::Kind::non_finite:
      return "non_finite";
    case RowViolation::Kind::negative:
      return "negative";
    case RowViolation::Kind::sum:
      return "sum";
  }
  return "unknown";
}

namespace {

struct Partial {
  std::size_t rows = 0;
  std::size_t checksum_count = 0;
  std::size_t row_count = 0;
  std::vector<ChecksumViolation> checksum;
  std::vector<RowViolation> rows_bad;
};

void scan_chunk(const AttentionStore& store, std::size_t chunk, const ValidateOptions& opt,
                std::vector<double>& scratch, Partial& out) {
  const auto& h = store.header();
  const std::size_t step = chunk / h.dims.blocks;
  const std::size_t block = chunk % h.dims.blocks;
  const auto bytes = store.chunk_bytes(chunk);
  const std::uint32_t actual = crc32(bytes);
  const std::uint32_t expected = store.stored_crc(chunk);
  if (actual != expected) {
    ++out.checksum_count;
    if (out.checksum.size() < opt.max_reported) out.checksum.push_back({step, block, expected, actual});
    return;
  }
  const auto& layout = store.layout();
  for (std::size_t head = 0; head < h.dims.heads; ++head) {
    for (std::size_t token = 0; token < h.dims.tokens; ++token) {
      ++out.rows;
      const auto row = bytes.subspan((head * h.dims.tokens + token) * layout.row_bytes, layout.row_bytes);
      decode_values(h.dtype, row, scratch);
      double sum = 0.0;
      std::optional<RowViolation> bad;
      for (double v : scratch) {
        if (!std::isfinite(v)) {
          bad = RowViolation{step, block, head, token, RowViolation::Kind::non_finite, v};
          break;
        }
        if (h.softmax_applied && v < 0.0 && !bad) {
          bad = RowViolation{step, block, head, token, RowViolation::Kind::negative, v};
        }
        sum += v;
      }
      if (!bad && h.softmax_applied && std::abs(sum - 1.0) > opt.tolerance) {
        bad = RowViolation{step, block, head, token, RowViolation::Kind::sum, sum};
      }
      if (bad) {
        ++out.row_count;
        if (out.rows_bad.size() < opt.max_reported) out.rows_bad.push_back(*bad);
      }
    }
  }
}

}  // namespace

ValidationReport validate_dump(const AttentionStore& store, const ValidateOptions& opt) {
  const std::size_t chunks = store.layout().chunk_count;
  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));

  // Each worker takes a strided share of chunks; results merge by coordinate
  // so the report does not depend on scheduling.
  std::vector<Partial> partials(threads);
  auto work = [&](unsigned id) {
    std::vector<double> scratch(store.header().dims.positions());
    for (std::size_t c = id; c < chunks; c += threads) scan_chunk(store, c, opt, scratch, partials[id]);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work, i);
  }

  ValidationReport r;
  r.tolerance = opt.tolerance;
  r.softmax_checked = store.header().softmax_applied;
  r.chunks_checked = chunks;
  for (auto& p : partials) {
    r.rows_checked += p.rows;
    r.checksum_failure_count += p.checksum_count;
    r.row_failure_count += p.row_count;
    r.checksum_failures.insert(r.checksum_failures.end(), p.checksum.begin(), p.checksum.end());
    r.row_failures.insert(r.row_failures.end(), p.rows_bad.begin(), p.rows_bad.end());
  }
  std::sort(r.checksum_failures.begin(), r.checksum_failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.step, a.block) < std::tie(b.step, b.block);
  });
  std::sort(r.row_failures.begin(), r.row_failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.step, a.block, a.head, a.token) < std::tie(b.step, b.block, b.head, b.token);
  });
  if (r.checksum_failures.size() > opt.max_reported) r.checksum_failures.resize(opt.max_reported);
  if (r.row_failures.size() > opt.max_reported) r.row_failures.resize(opt.max_reported);
  return r;
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json j;
  j["ok"] = ok();
  j["tolerance"] = tolerance;
  j["softmax_checked"] = softmax_checked;
  j["chunks_checked"] = chunks_checked;
  j["rows_checked"] = rows_checked;
  j["checksum_failure_count"] = checksum_failure_count;
  j["row_failure_count"] = row_failure_count;
  auto& cs = j["checksum_failures"] = nlohmann::json::array();
  for (const auto& c : checksum_failures) {
    cs.push_back({{"step", c.step}, {"block", c.block}, {"expected", c.expected}, {"actual", c.actual}});
  }
  auto& rs = j["row_failures"] = nlohmann::json::array();
  for (const auto& v : row_failures) {
    rs.push_back({{"step", v.step},
                  {"block", v.block},
                  {"head", v.head},
                  {"token", v.token},
                  {"kind", to_string(v.kind)},
                  {"value", std::isfinite(v.value) ? nlohmann::json(v.value) : nlohmann::json(nullptr)}});
  }
  return j;
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  os << (ok() ? "OK" : "FAILED") << ": " << chunks_checked << " chunks, " << rows_checked
     << " rows checked";
  if (softmax_checked) os << " (softmax tolerance " << tolerance << ")";
  os << "\n";
  os << "checksum failures: " << checksum_failure_count << "\n";
  for (const auto& c : checksum_failures) {
    os << "  chunk step=" << c.step << " block=" << c.block << std::hex << " expected=0x" << c.expected
       << " actual=0x" << c.actual << std::dec << "\n";
  }
  os << "row failures: " << row_failure_count << "\n";
  for (const auto& v : row_failures) {
    os << "  row step=" << v.step << " block=" << v.block << " head=" << v.head << " token=" << v.token
       << " " << to_string(v.kind) << "=" << v.value << "\n";
  }
  return os.str();
}

}  // namespace attnscope
