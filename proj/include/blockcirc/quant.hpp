#pragma once

#include <cstdint>
#include <vector>

#include "blockcirc/bcm.hpp"
#include "blockcirc/tensor.hpp"

namespace blockcirc {

// Signed 16-bit fixed point with a fixed number of fraction bits (Q(15-f).f).
struct FixedPointFormat {
  static constexpr int kTotalBits = 16;
  int frac_bits = 15;

  explicit FixedPointFormat(int frac = 15);

  double step() const noexcept;       // 2^-frac_bits
  double max_value() const noexcept;  // 2^(15-f) - 2^-f
  double min_value() const noexcept;  // -2^(15-f)

  bool operator==(const FixedPointFormat&) const = default;
};

struct QuantizedTensor {
  std::vector<std::size_t> shape;
  std::vector<std::int16_t> raw;
  FixedPointFormat format;

  bool operator==(const QuantizedTensor&) const = default;
};

// Saturating clamp, scale by 2^f, round half away from zero.
std::int16_t quantize_value(double x, FixedPointFormat fmt) noexcept;
double dequantize_value(std::int16_t raw, FixedPointFormat fmt) noexcept;

QuantizedTensor quantize(const Tensor& x, FixedPointFormat fmt);
Tensor dequantize(const QuantizedTensor& q);

// Largest fraction-bit count whose range holds max|x| without clamping.
// Throws DomainError for an empty tensor.
FixedPointFormat choose_format(const Tensor& x);
FixedPointFormat choose_format(std::span<const double> x);

// A block-circulant matrix whose index vectors are stored in 16-bit fixed point.
struct QuantizedBcm {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t block_size = 0;
  CompressionMode mode = CompressionMode::kDiagonalMean;
  QuantizedTensor index;  // shape {f*g*b}

  BlockCirculantMatrix dequantize() const;
};

QuantizedBcm quantize(const BlockCirculantMatrix& m);
QuantizedBcm quantize(const BlockCirculantMatrix& m, FixedPointFormat fmt);

// Quantize-dequantize in one step; used to emulate 16-bit activations.
void round_trip_q16(std::span<double> values);

}  // namespace blockcirc
