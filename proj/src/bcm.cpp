#include "blockcirc/bcm.hpp"

#include <algorithm>

#include "blockcirc/error.hpp"

namespace blockcirc {
namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

std::string to_string(CompressionMode mode) {
  switch (mode) {
    case CompressionMode::kDiagonalMean: return "diagonal-mean";
    case CompressionMode::kRowMean: return "row-mean";
    case CompressionMode::kFirstRow: return "first-row";
  }
  return "unknown";
}

CompressionMode compression_mode_from_string(const std::string& name) {
  if (name == "diagonal-mean") return CompressionMode::kDiagonalMean;
  if (name == "row-mean") return CompressionMode::kRowMean;
  if (name == "first-row") return CompressionMode::kFirstRow;
  throw UsageError("unknown compression mode '" + name +
                   "' (expected diagonal-mean, row-mean or first-row)");
}

CompressionMode compression_mode_from_code(std::uint8_t code) {
  if (code > 2) throw ValidationError("invalid compression mode code " + std::to_string(code));
  return static_cast<CompressionMode>(code);
}

BlockCirculantMatrix::BlockCirculantMatrix(std::size_t rows, std::size_t cols,
                                           std::size_t block_size,
                                           std::vector<double> index_data,
                                           CompressionMode mode)
    : rows_(rows), cols_(cols), block_(block_size), mode_(mode), index_(std::move(index_data)) {
  if (block_ == 0) throw DomainError("block size must be >= 1");
  if (rows_ == 0 || cols_ == 0) throw ShapeError("block-circulant matrix must be non-empty");
  grid_rows_ = ceil_div(rows_, block_);
  grid_cols_ = ceil_div(cols_, block_);
  if (index_.size() != grid_rows_ * grid_cols_ * block_) {
    throw ShapeError("expected " + std::to_string(grid_rows_ * grid_cols_ * block_) +
                     " index values for a " + std::to_string(rows_) + "x" +
                     std::to_string(cols_) + " matrix with b=" + std::to_string(block_) +
                     ", got " + std::to_string(index_.size()));
  }

  fft_size_ = fft::is_pow2(block_) ? block_ : fft::next_pow2(2 * block_ - 1);
  plan_ = std::make_shared<const fft::Plan<double>>(fft_size_);
  spectra_.assign(grid_rows_ * grid_cols_ * fft_size_, {});
  for (std::size_t blk = 0; blk < grid_rows_ * grid_cols_; ++blk) {
    std::span<std::complex<double>> s(spectra_.data() + blk * fft_size_, fft_size_);
    for (std::size_t k = 0; k < block_; ++k) s[k] = index_[blk * block_ + k];
    plan_->forward(s);
  }
}

std::span<const double> BlockCirculantMatrix::index_vector(std::size_t i, std::size_t j) const {
  if (i >= grid_rows_ || j >= grid_cols_) throw ShapeError("block index out of range");
  return std::span<const double>(index_).subspan((i * grid_cols_ + j) * block_, block_);
}

double BlockCirculantMatrix::compression_ratio() const noexcept {
  return static_cast<double>(rows_ * cols_) / static_cast<double>(index_.size());
}

Tensor BlockCirculantMatrix::expand() const {
  Tensor out({rows_, cols_});
  for (std::size_t r = 0; r < rows_; ++r) {
    const std::size_t bi = r / block_;
    const std::size_t rr = r % block_;
    for (std::size_t c = 0; c < cols_; ++c) {
      const std::size_t bj = c / block_;
      const std::size_t cc = c % block_;
      const double* p = index_.data() + (bi * grid_cols_ + bj) * block_;
      out.at(r, c) = p[(rr + block_ - cc) % block_];
    }
  }
  return out;
}

void BlockCirculantMatrix::matvec_into(std::span<const double> x, std::span<double> y) const {
  const std::size_t L = fft_size_;
  std::vector<std::complex<double>> xhat(grid_cols_ * L);
  for (std::size_t j = 0; j < grid_cols_; ++j) {
    std::span<std::complex<double>> xs(xhat.data() + j * L, L);
    const std::size_t lo = j * block_;
    const std::size_t hi = std::min(cols_, lo + block_);
    for (std::size_t c = lo; c < hi; ++c) xs[c - lo] = x[c];
    plan_->forward(xs);
  }

  // Block products are summed in the frequency domain so each block row
  // needs one inverse transform. Summation over j is in fixed order.
  std::vector<std::complex<double>> acc(L);
  for (std::size_t i = 0; i < grid_rows_; ++i) {
    std::fill(acc.begin(), acc.end(), std::complex<double>{});
    for (std::size_t j = 0; j < grid_cols_; ++j) {
      const std::complex<double>* p = spectra_.data() + (i * grid_cols_ + j) * L;
      const std::complex<double>* xs = xhat.data() + j * L;
      for (std::size_t k = 0; k < L; ++k) acc[k] += p[k] * xs[k];
    }
    plan_->inverse(acc);
    const std::size_t lo = i * block_;
    const std::size_t hi = std::min(rows_, lo + block_);
    for (std::size_t r = lo; r < hi; ++r) {
      const std::size_t k = r - lo;
      double v = acc[k].real();
      // Fold the linear convolution tail back when L > b.
      if (L != block_ && k + block_ < 2 * block_ - 1) v += acc[k + block_].real();
      y[r] = v;
    }
  }
}

Tensor BlockCirculantMatrix::matvec(std::span<const double> x) const {
  if (x.size() != cols_) {
    throw ShapeError("bcm matvec: input length " + std::to_string(x.size()) +
                     " != cols " + std::to_string(cols_));
  }
  Tensor y({rows_});
  matvec_into(x, y.data());
  return y;
}

Tensor BlockCirculantMatrix::matvec(const Tensor& x) const {
  require_rank(x, 1, "bcm matvec");
  return matvec(x.data());
}

Tensor BlockCirculantMatrix::matmul(const Tensor& x) const {
  require_rank(x, 2, "bcm matmul");
  if (x.rows() != cols_) {
    throw ShapeError("bcm matmul: input " + shape_string(x.shape()) + " needs " +
                     std::to_string(cols_) + " rows");
  }
  const std::size_t s = x.cols();
  Tensor out({rows_, s});
  std::vector<double> col(cols_);
  std::vector<double> res(rows_);
  for (std::size_t k = 0; k < s; ++k) {
    for (std::size_t c = 0; c < cols_; ++c) col[c] = x.at(c, k);
    matvec_into(col, res);
    for (std::size_t r = 0; r < rows_; ++r) out.at(r, k) = res[r];
  }
  return out;
}

Tensor BlockCirculantMatrix::apply_rows(const Tensor& x) const {
  require_rank(x, 2, "bcm apply_rows");
  if (x.cols() != cols_) {
    throw ShapeError("bcm apply_rows: input " + shape_string(x.shape()) + " needs " +
                     std::to_string(cols_) + " columns");
  }
  Tensor out({x.rows(), rows_});
  for (std::size_t k = 0; k < x.rows(); ++k) matvec_into(x.row(k), out.row(k));
  return out;
}

std::vector<double> fit_index_vector(std::span<const double> block, std::size_t b,
                                     CompressionMode mode) {
  std::vector<double> p(b, 0.0);
  const double inv_b = 1.0 / static_cast<double>(b);
  switch (mode) {
    case CompressionMode::kDiagonalMean:
      for (std::size_t k = 0; k < b; ++k) {
        double sum = 0.0;
        for (std::size_t c = 0; c < b; ++c) sum += block[((c + k) % b) * b + c];
        p[k] = sum * inv_b;
      }
      break;
    case CompressionMode::kRowMean:
      for (std::size_t k = 0; k < b; ++k) {
        double sum = 0.0;
        for (std::size_t c = 0; c < b; ++c) sum += block[k * b + c];
        p[k] = sum * inv_b;
      }
      break;
    case CompressionMode::kFirstRow:
      // Row 0 of a circulant block holds p[(-c) mod b] at column c.
      for (std::size_t k = 0; k < b; ++k) p[k] = block[(b - k) % b];
      break;
  }
  return p;
}

BlockCirculantMatrix compress(const Tensor& w, std::size_t block_size, CompressionMode mode) {
  if (block_size == 0) throw DomainError("compress: block size must be >= 1");
  require_rank(w, 2, "compress");
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const std::size_t b = block_size;
  const std::size_t f = ceil_div(m, b);
  const std::size_t g = ceil_div(n, b);

  std::vector<double> index;
  index.reserve(f * g * b);
  std::vector<double> block(b * b);
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t c = 0; c < b; ++c) {
          const std::size_t gr = i * b + r;
          const std::size_t gc = j * b + c;
          block[r * b + c] = (gr < m && gc < n) ? w.at(gr, gc) : 0.0;
        }
      }
      const auto p = fit_index_vector(block, b, mode);
      index.insert(index.end(), p.begin(), p.end());
    }
  }
  return BlockCirculantMatrix(m, n, b, std::move(index), mode);
}

}  // namespace blockcirc
