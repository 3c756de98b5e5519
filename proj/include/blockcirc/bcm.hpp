#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "blockcirc/fft.hpp"
#include "blockcirc/tensor.hpp"

namespace blockcirc {

// How a dense b x b block is reduced to a single index vector.
enum class CompressionMode : std::uint8_t {
  // Mean of each wrapped diagonal; the least-squares circulant fit.
  kDiagonalMean = 0,
  // p[k] = mean of block row k, the literal row-average formulation.
  kRowMean = 1,
  // The block's first row, re-indexed into first-column order.
  kFirstRow = 2,
};

std::string to_string(CompressionMode mode);
CompressionMode compression_mode_from_string(const std::string& name);
CompressionMode compression_mode_from_code(std::uint8_t code);

// An m x n matrix stored as an f x g grid of circulant b x b blocks,
// f = ceil(m/b), g = ceil(n/b). Block (i, j) is fully described by its index
// vector p_ij (the block's first column): entry (r, c) equals p_ij[(r - c) mod b].
// When b does not divide m or n the matrix is logically zero-padded; the
// padding is stripped by expand() and matvec().
//
// Immutable after construction. The spectra FFT(p_ij) are computed eagerly so
// every const member is safe to call concurrently.
class BlockCirculantMatrix {
 public:
  // index_data holds f*g*b values, blocks in row-major grid order.
  BlockCirculantMatrix(std::size_t rows, std::size_t cols, std::size_t block_size,
                       std::vector<double> index_data,
                       CompressionMode mode = CompressionMode::kDiagonalMean);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t block_size() const noexcept { return block_; }
  std::size_t grid_rows() const noexcept { return grid_rows_; }
  std::size_t grid_cols() const noexcept { return grid_cols_; }
  std::size_t pad_rows() const noexcept { return grid_rows_ * block_ - rows_; }
  std::size_t pad_cols() const noexcept { return grid_cols_ * block_ - cols_; }
  CompressionMode mode() const noexcept { return mode_; }

  std::span<const double> index_vector(std::size_t i, std::size_t j) const;
  std::span<const double> index_data() const noexcept { return index_; }
  std::size_t stored_count() const noexcept { return index_.size(); }

  // (m*n) / (f*g*b); exactly b when b divides both m and n.
  double compression_ratio() const noexcept;

  Tensor expand() const;

  // y = W x with every block product computed as IFFT(FFT(p_ij) o FFT(x_j)).
  Tensor matvec(std::span<const double> x) const;
  Tensor matvec(const Tensor& x) const;

  // Column k of the result is matvec of column k of x (x is n x s).
  Tensor matmul(const Tensor& x) const;

  // Row k of the result is matvec of row k of x (x is s x n). This is the
  // layout used by activations in the transformer layers.
  Tensor apply_rows(const Tensor& x) const;

 private:
  void matvec_into(std::span<const double> x, std::span<double> y) const;

  std::size_t rows_;
  std::size_t cols_;
  std::size_t block_;
  std::size_t grid_rows_;
  std::size_t grid_cols_;
  CompressionMode mode_;
  std::vector<double> index_;

  // FFT length: b for power-of-two b, otherwise next_pow2(2b - 1) so that the
  // linear convolution can be folded back into a length-b circular one.
  std::size_t fft_size_;
  std::shared_ptr<const fft::Plan<double>> plan_;
  std::vector<std::complex<double>> spectra_;  // f*g*fft_size_
};

// Partitions a rank-2 tensor into b x b blocks (zero-padding the trailing
// edge) and reduces each block to an index vector. Throws DomainError for
// b == 0 and ShapeError for non-matrix input.
BlockCirculantMatrix compress(const Tensor& w, std::size_t block_size,
                              CompressionMode mode = CompressionMode::kDiagonalMean);

// Index vector for one dense b x b block given row-major.
std::vector<double> fit_index_vector(std::span<const double> block, std::size_t b,
                                     CompressionMode mode);

}  // namespace blockcirc
