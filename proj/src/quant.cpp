#include "blockcirc/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "blockcirc/error.hpp"

namespace blockcirc {

FixedPointFormat::FixedPointFormat(int frac) : frac_bits(frac) {
  if (frac < 0 || frac > 15) {
    throw DomainError("fixed-point frac_bits must be in [0, 15], got " + std::to_string(frac));
  }
}

double FixedPointFormat::step() const noexcept { return std::ldexp(1.0, -frac_bits); }
double FixedPointFormat::max_value() const noexcept {
  return std::ldexp(1.0, 15 - frac_bits) - step();
}
double FixedPointFormat::min_value() const noexcept { return -std::ldexp(1.0, 15 - frac_bits); }

std::int16_t quantize_value(double x, FixedPointFormat fmt) noexcept {
  constexpr double kMax = std::numeric_limits<std::int16_t>::max();
  constexpr double kMin = std::numeric_limits<std::int16_t>::min();
  if (std::isnan(x)) return 0;
  // Scaling by a power of two is exact, so clamping in the raw domain is
  // equivalent to clamping to [min_value, max_value].
  const double scaled = std::round(std::ldexp(x, fmt.frac_bits));  // half away from zero
  return static_cast<std::int16_t>(std::clamp(scaled, kMin, kMax));
}

double dequantize_value(std::int16_t raw, FixedPointFormat fmt) noexcept {
  return std::ldexp(static_cast<double>(raw), -fmt.frac_bits);
}

QuantizedTensor quantize(const Tensor& x, FixedPointFormat fmt) {
  QuantizedTensor q{x.shape(), std::vector<std::int16_t>(x.size()), fmt};
  for (std::size_t i = 0; i < x.size(); ++i) q.raw[i] = quantize_value(x[i], fmt);
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  std::vector<double> values(q.raw.size());
  for (std::size_t i = 0; i < q.raw.size(); ++i) values[i] = dequantize_value(q.raw[i], q.format);
  return Tensor(q.shape, std::move(values));
}

FixedPointFormat choose_format(std::span<const double> x) {
  if (x.empty()) throw DomainError("choose_format: empty tensor");
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  for (int frac = 15; frac > 0; --frac) {
    const FixedPointFormat fmt(frac);
    // Anything below max + step/2 rounds onto a representable code.
    if (peak < fmt.max_value() + 0.5 * fmt.step()) return fmt;
  }
  return FixedPointFormat(0);
}

FixedPointFormat choose_format(const Tensor& x) { return choose_format(x.data()); }

BlockCirculantMatrix QuantizedBcm::dequantize() const {
  std::vector<double> values(index.raw.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = dequantize_value(index.raw[i], index.format);
  }
  return BlockCirculantMatrix(rows, cols, block_size, std::move(values), mode);
}

QuantizedBcm quantize(const BlockCirculantMatrix& m, FixedPointFormat fmt) {
  const Tensor flat({m.stored_count()},
                    std::vector<double>(m.index_data().begin(), m.index_data().end()));
  return QuantizedBcm{m.rows(), m.cols(), m.block_size(), m.mode(), quantize(flat, fmt)};
}

QuantizedBcm quantize(const BlockCirculantMatrix& m) {
  return quantize(m, choose_format(m.index_data()));
}

void round_trip_q16(std::span<double> values) {
  if (values.empty()) return;
  const FixedPointFormat fmt = choose_format(values);
  for (double& v : values) v = dequantize_value(quantize_value(v, fmt), fmt);
}

}  // namespace blockcirc
