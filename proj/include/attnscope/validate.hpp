#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attnscope/attention_store.hpp"

namespace attnscope {

struct ChecksumViolation {
  std::size_t step = 0;
  std::size_t block = 0;
  std::uint32_t expected = 0;
  std::uint32_t actual = 0;
};

struct RowViolation {
  enum class Kind { non_finite, negative, sum };
  std::size_t step = 0;
  std::size_t block = 0;
  std::size_t head = 0;
  std::size_t token = 0;
  Kind kind = Kind::sum;
  double value = 0.0;  // offending element for negative/non_finite, row sum for sum
};

struct ValidationReport {
  double tolerance = 0.0;
  bool softmax_checked = false;
  std::size_t chunks_checked = 0;
  std::size_t rows_checked = 0;
  std::size_t checksum_failure_count = 0;
  std::size_t row_failure_count = 0;
  // First K of each, sorted by coordinate.
  std::vector<ChecksumViolation> checksum_failures;
  std::vector<RowViolation> row_failures;

  bool ok() const noexcept { return checksum_failure_count == 0 && row_failure_count == 0; }
  nlohmann::json to_json() const;
  std::string to_text() const;
};

struct ValidateOptions {
  double tolerance = 1e-3;
  std::size_t max_reported = 20;
  // 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
};

/// Exhaustive integrity scan: every chunk CRC, and when the dump claims
/// softmax rows, non-negativity and |sum - 1| <= tolerance for every row.
/// Rows of a chunk that fails its CRC are not row-checked.
ValidationReport validate_dump(const AttentionStore& store, const ValidateOptions& options = {});

std::string_view to_string(RowViolation::Kind kind) noexcept;

}  // namespace attnscope
