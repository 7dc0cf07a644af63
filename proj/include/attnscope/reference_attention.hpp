#pragma once

#include <cstddef>
#include <vector>

namespace attnscope {

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d);

  double& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
};

/// softmax(scale * Q K^T) row-wise, with the row max subtracted before
/// exponentiating. Q is tokens x d, K is positions x d; the result is
/// tokens x positions, one probability row per prompt token.
Matrix reference_attention(const Matrix& q, const Matrix& k, double scale = 1.0);

/// Row-wise stable softmax of an arbitrary logits matrix.
Matrix softmax_rows(const Matrix& logits);

}  // namespace attnscope
