#include <gtest/gtest.h>

#include <cmath>

#include "blockcirc/error.hpp"
#include "blockcirc/quant.hpp"
#include "blockcirc/rng.hpp"

namespace blockcirc {
namespace {

TEST(Quantize, Examples) {
  const FixedPointFormat q10(10);
  EXPECT_EQ(quantize_value(0.5, q10), 512);
  EXPECT_EQ(quantize_value(0.0, q10), 0);
  EXPECT_EQ(quantize_value(1e6, q10), 32767);
  EXPECT_EQ(dequantize_value(512, q10), 0.5);
  EXPECT_EQ(dequantize_value(-1024, q10), -1.0);
}

TEST(Quantize, FormatRange) {
  const FixedPointFormat f(10);
  EXPECT_EQ(f.max_value(), 32.0 - 1.0 / 1024);
  EXPECT_EQ(f.min_value(), -32.0);
  EXPECT_THROW(FixedPointFormat(16), DomainError);
  EXPECT_THROW(FixedPointFormat(-1), DomainError);
}

TEST(Quantize, RoundTripBoundFrac10) {
  Rng rng(41);
  const FixedPointFormat f(10);
  std::vector<double> xs = {f.min_value(), f.max_value(), 0.0};
  for (int i = 0; i < 5000; ++i) xs.push_back(rng.uniform(f.min_value(), f.max_value()));
  Tensor t = Tensor::vector(xs);
  const Tensor back = dequantize(quantize(t, f));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_LE(std::abs(xs[i] - back[i]), std::ldexp(1.0, -11));
  }
}

TEST(Quantize, RoundsHalfAwayFromZero) {
  const FixedPointFormat f(0);
  EXPECT_EQ(quantize_value(2.5, f), 3);
  EXPECT_EQ(quantize_value(-2.5, f), -3);
  EXPECT_EQ(quantize_value(2.4999, f), 2);
}

TEST(Quantize, Monotone) {
  Rng rng(42);
  const FixedPointFormat f(8);
  for (int i = 0; i < 2000; ++i) {
    const double a = rng.uniform(-200, 200);
    const double b = a + rng.uniform(0, 2);
    EXPECT_LE(quantize_value(a, f), quantize_value(b, f));
  }
}

TEST(Quantize, SaturationExact) {
  for (int frac = 0; frac <= 15; ++frac) {
    const FixedPointFormat f(frac);
    EXPECT_EQ(dequantize_value(quantize_value(1e9, f), f), f.max_value());
    EXPECT_EQ(dequantize_value(quantize_value(-1e9, f), f), f.min_value());
  }
  EXPECT_EQ(quantize_value(std::nan(""), FixedPointFormat(4)), 0);
}

TEST(ChooseFormat, Examples) {
  EXPECT_EQ(choose_format(Tensor::vector({0.9, -0.3})).frac_bits, 15);
  EXPECT_EQ(choose_format(Tensor::vector({100.0, 1.0})).frac_bits, 8);
  EXPECT_EQ(choose_format(Tensor::vector({0.0, 0.0})).frac_bits, 15);
  EXPECT_THROW(choose_format(Tensor::vector({})), DomainError);
}

TEST(ChooseFormat, NeverClamps) {
  Rng rng(43);
  for (int i = 0; i < 500; ++i) {
    const double peak = std::ldexp(rng.uniform(0.5, 1.0), static_cast<int>(rng.integer(0, 14)));
    const auto t = Tensor::vector({peak, -peak / 2});
    const auto f = choose_format(t);
    const Tensor back = dequantize(quantize(t, f));
    EXPECT_LE(std::abs(back[0] - peak), f.step() / 2);
    if (f.frac_bits < 15) {
      // One more fraction bit would have clamped.
      EXPECT_GE(peak, FixedPointFormat(f.frac_bits + 1).max_value() +
                          FixedPointFormat(f.frac_bits + 1).step() / 2);
    }
  }
}

TEST(QuantizedBcm, DequantizesWithinStep) {
  Rng rng(44);
  std::vector<double> p(2 * 2 * 4);
  for (double& v : p) v = rng.uniform(-2, 2);
  BlockCirculantMatrix m(8, 8, 4, p);
  const auto q = quantize(m);
  const auto back = q.dequantize();
  EXPECT_EQ(back.rows(), 8u);
  EXPECT_EQ(back.block_size(), 4u);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_LE(std::abs(back.index_data()[i] - p[i]), q.index.format.step() / 2);
  }
}

}  // namespace
}  // namespace blockcirc
