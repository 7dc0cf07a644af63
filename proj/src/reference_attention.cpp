#include "attnscope/reference_attention.hpp"

#include <algorithm>
#include <cmath>

#include "attnscope/error.hpp"

namespace attnscope {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != r * c) throw ParameterError("matrix data size does not match rows x cols");
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const double* in = &logits.data[r * logits.cols];
    double* o = &out.data[r * logits.cols];
    const double mx = *std::max_element(in, in + logits.cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (std::size_t c = 0; c < logits.cols; ++c) o[c] /= sum;
  }
  return out;
}

Matrix reference_attention(const Matrix& q, const Matrix& k, double scale) {
  if (q.cols != k.cols) {
    throw ParameterError("reference_attention: Q has " + std::to_string(q.cols) +
                         " columns but K has " + std::to_string(k.cols));
  }
  if (k.rows == 0) throw ParameterError("reference_attention: K has no rows");
  Matrix logits(q.rows, k.rows);
  for (std::size_t i = 0; i < q.rows; ++i) {
    for (std::size_t j = 0; j < k.rows; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < q.cols; ++c) dot += q(i, c) * k(j, c);
      logits(i, j) = scale * dot;
    }
  }
  return softmax_rows(logits);
}

}  // namespace attnscope
