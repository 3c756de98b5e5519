#include <gtest/gtest.h>

#include <cmath>

#include "blockcirc/bcm.hpp"
#include "blockcirc/error.hpp"
#include "blockcirc/rng.hpp"
#include "blockcirc/verify.hpp"

namespace blockcirc {
namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

BlockCirculantMatrix random_bcm(Rng& rng, std::size_t m, std::size_t n, std::size_t b,
                                CompressionMode mode = CompressionMode::kDiagonalMean) {
  const std::size_t count = ((m + b - 1) / b) * ((n + b - 1) / b) * b;
  return BlockCirculantMatrix(m, n, b, random_values(rng, count), mode);
}

double frobenius_to_circulant(const std::vector<double>& block, const std::vector<double>& p,
                              std::size_t b) {
  double e = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t c = 0; c < b; ++c) {
      const double d = block[r * b + c] - p[(r + b - c) % b];
      e += d * d;
    }
  }
  return e;
}

TEST(Compress, IdentityDiagonalMean) {
  const auto m = compress(Tensor::identity(2), 2, CompressionMode::kDiagonalMean);
  const auto p = m.index_vector(0, 0);
  // I is circulant with index vector [1, 0]; compression must return it unchanged.
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_DOUBLE_EQ(p[1], 0.0);
}

TEST(Compress, RowMeanLiteral) {
  const auto m = compress(Tensor::matrix({{1, 2}, {3, 4}}), 2, CompressionMode::kRowMean);
  const auto p = m.index_vector(0, 0);
  EXPECT_DOUBLE_EQ(p[0], 1.5);
  EXPECT_DOUBLE_EQ(p[1], 3.5);
}

TEST(Compress, FirstRowCopiesRow) {
  // First row [a, b, c] of a circulant block is p[0], p[2], p[1].
  const auto m = compress(Tensor::matrix({{1, 2, 3}, {0, 0, 0}, {0, 0, 0}}), 3,
                          CompressionMode::kFirstRow);
  const auto e = m.expand();
  EXPECT_DOUBLE_EQ(e.at(0, 0), 1);
  EXPECT_DOUBLE_EQ(e.at(0, 1), 2);
  EXPECT_DOUBLE_EQ(e.at(0, 2), 3);
}

TEST(Compress, Errors) {
  EXPECT_THROW(compress(Tensor::identity(4), 0), DomainError);
  EXPECT_THROW(compress(Tensor::vector({1, 2, 3}), 2), ShapeError);
}

TEST(Compress, ExactOnCirculantInputForProjectingModes) {
  Rng rng(21);
  for (auto mode : {CompressionMode::kDiagonalMean, CompressionMode::kFirstRow}) {
    const auto original = random_bcm(rng, 24, 16, 8);
    const auto again = compress(original.expand(), 8, mode);
    for (std::size_t i = 0; i < original.stored_count(); ++i) {
      EXPECT_NEAR(original.index_data()[i], again.index_data()[i], 1e-12) << to_string(mode);
    }
  }
}

TEST(Compress, RowMeanCollapsesCirculantBlocks) {
  // Every row of a circulant block has the same mean, so the row-mean reading
  // maps it to a constant index vector rather than reproducing it.
  Rng rng(22);
  const auto original = random_bcm(rng, 8, 8, 8);
  const auto again = compress(original.expand(), 8, CompressionMode::kRowMean);
  double mean = 0.0;
  for (double v : original.index_data()) mean += v / 8.0;
  for (double v : again.index_data()) EXPECT_NEAR(v, mean, 1e-12);
}

TEST(Compress, DiagonalMeanIsLeastSquaresOptimal) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto block = random_values(rng, 16);
    const auto best = fit_index_vector(block, 4, CompressionMode::kDiagonalMean);
    const double best_err = frobenius_to_circulant(block, best, 4);
    for (int probe = 0; probe < 500; ++probe) {
      auto p = best;
      const double scale = probe < 250 ? 0.5 : 1e-3;
      for (double& v : p) v += rng.uniform(-scale, scale);
      EXPECT_GE(frobenius_to_circulant(block, p, 4), best_err - 1e-12);
    }
    for (auto other : {CompressionMode::kRowMean, CompressionMode::kFirstRow}) {
      EXPECT_GE(frobenius_to_circulant(block, fit_index_vector(block, 4, other), 4),
                best_err - 1e-12);
    }
  }
}

TEST(Expand, ImpulseIsIdentity) {
  BlockCirculantMatrix m(4, 4, 4, {1, 0, 0, 0});
  EXPECT_EQ(m.expand(), Tensor::identity(4));
}

TEST(Expand, ZeroVectorIsZeroMatrix) {
  BlockCirculantMatrix m(4, 8, 4, std::vector<double>(8, 0.0));
  EXPECT_EQ(m.expand(), Tensor::zeros({4, 8}));
}

TEST(Expand, MatchesIndexArithmetic) {
  Rng rng(24);
  for (std::size_t b : {1, 3, 4, 8}) {
    const auto m = random_bcm(rng, 13, 10, b);
    EXPECT_EQ(m.expand(), verify::expand_by_index(m)) << "b=" << b;
  }
}

TEST(Bcm, GridAndStorage) {
  Rng rng(25);
  const auto m = random_bcm(rng, 10, 7, 4);
  EXPECT_EQ(m.grid_rows(), 3u);
  EXPECT_EQ(m.grid_cols(), 2u);
  EXPECT_EQ(m.stored_count(), 3u * 2u * 4u);
  EXPECT_EQ(m.pad_rows(), 2u);
  EXPECT_EQ(m.pad_cols(), 1u);
  EXPECT_LE(m.stored_count(), 70u);
  EXPECT_THROW(BlockCirculantMatrix(4, 4, 2, std::vector<double>(7)), ShapeError);
}

TEST(Bcm, CompressionRatio) {
  EXPECT_DOUBLE_EQ(BlockCirculantMatrix(768, 768, 16, std::vector<double>(48 * 48 * 16))
                       .compression_ratio(),
                   16.0);
  EXPECT_DOUBLE_EQ(BlockCirculantMatrix(200, 200, 8, std::vector<double>(25 * 25 * 8))
                       .compression_ratio(),
                   8.0);
  EXPECT_DOUBLE_EQ(BlockCirculantMatrix(5, 3, 1, std::vector<double>(15)).compression_ratio(),
                   1.0);
}

TEST(Matvec, IdentityAndZero) {
  BlockCirculantMatrix eye(8, 8, 4, {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0});
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8};
  const auto y = eye.matvec(x);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
  BlockCirculantMatrix zero(8, 8, 4, std::vector<double>(16, 0.0));
  const auto z = zero.matvec(x);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(Matvec, MatchesDenseProduct16x16) {
  Rng rng(26);
  const auto m = random_bcm(rng, 16, 16, 4);
  const auto x = random_values(rng, 16);
  EXPECT_LE(max_abs_diff(m.matvec(x), dense_matvec(m.expand(), x)), 1e-9);
}

TEST(Matvec, RandomEquivalenceProperty) {
  Rng rng(27);
  const std::size_t blocks[] = {2, 4, 8, 16};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = blocks[rng.integer(0, 3)];
    const std::size_t m = b * rng.integer(1, 64 / b);
    const std::size_t n = b * rng.integer(1, 64 / b);
    const auto bcm = random_bcm(rng, m, n, b);
    const auto x = random_values(rng, n);
    ASSERT_LE(max_abs_diff(bcm.matvec(x), dense_matvec(bcm.expand(), x)), 1e-9);
  }
}

TEST(Matvec, PaddedMatchesZeroExtendedDense) {
  Rng rng(28);
  const Tensor w = [&] {
    Tensor t({10, 6});
    for (double& v : t.values()) v = rng.uniform(-1, 1);
    return t;
  }();
  const auto m = compress(w, 4);
  const auto x = random_values(rng, 6);
  const auto y = m.matvec(x);
  EXPECT_EQ(y.size(), 10u);
  EXPECT_LE(max_abs_diff(y, dense_matvec(m.expand(), x)), 1e-12);
}

TEST(Matvec, NonPowerOfTwoBlock) {
  Rng rng(29);
  for (std::size_t b : {3, 5, 6, 7}) {
    const auto m = random_bcm(rng, 2 * b + 1, 3 * b, b);
    const auto x = random_values(rng, 3 * b);
    EXPECT_LE(max_abs_diff(m.matvec(x), dense_matvec(verify::expand_by_index(m), x)), 1e-12);
  }
}

TEST(Matvec, LengthMismatch) {
  Rng rng(30);
  const auto m = random_bcm(rng, 8, 8, 4);
  EXPECT_THROW(m.matvec(std::vector<double>(7)), ShapeError);
}

TEST(Matmul, ColumnsAreMatvecs) {
  Rng rng(31);
  const auto m = random_bcm(rng, 12, 8, 4);
  Tensor x({8, 3});
  for (double& v : x.values()) v = rng.uniform(-1, 1);
  EXPECT_LE(max_abs_diff(m.matmul(x), dense_matmul(m.expand(), x)), 1e-9);

  Tensor col({8, 1});
  for (std::size_t i = 0; i < 8; ++i) col.at(i, 0) = x.at(i, 0);
  const auto single = m.matmul(col);
  const auto mv = m.matvec(col.values());
  for (std::size_t i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(single.at(i, 0), mv[i]);
}

TEST(Matmul, EmptyBatch) {
  Rng rng(32);
  const auto m = random_bcm(rng, 12, 8, 4);
  const auto y = m.matmul(Tensor::zeros({8, 0}));
  EXPECT_EQ(y.shape(), (std::vector<std::size_t>{12, 0}));
  EXPECT_THROW(m.matmul(Tensor::zeros({7, 2})), ShapeError);
}

TEST(Matmul, ApplyRowsIsTransposedMatmul) {
  Rng rng(33);
  const auto m = random_bcm(rng, 8, 12, 4);
  Tensor x({5, 12});
  for (double& v : x.values()) v = rng.uniform(-1, 1);
  EXPECT_LE(max_abs_diff(m.apply_rows(x), m.matmul(x.transposed()).transposed()), 1e-12);
}

TEST(Mode, StringRoundTrip) {
  for (auto mode : {CompressionMode::kDiagonalMean, CompressionMode::kRowMean,
                    CompressionMode::kFirstRow}) {
    EXPECT_EQ(compression_mode_from_string(to_string(mode)), mode);
  }
  EXPECT_THROW(compression_mode_from_string("median"), Error);
}

}  // namespace
}  // namespace blockcirc
