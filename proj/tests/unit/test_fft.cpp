#include <gtest/gtest.h>

#include <cmath>

#include "blockcirc/error.hpp"
#include "blockcirc/fft.hpp"
#include "blockcirc/rng.hpp"
#include "blockcirc/verify.hpp"

namespace blockcirc {
namespace {

using cd = std::complex<double>;

fft::ComplexVec<double> random_vec(Rng& rng, std::size_t n) {
  fft::ComplexVec<double> x(n);
  for (auto& c : x) c = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return x;
}

double max_err(const std::vector<cd>& a, const std::vector<cd>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(Fft, ImpulseIsAllOnes) {
  const auto y = fft::fft(fft::ComplexVec<double>{1, 0, 0, 0});
  for (const auto& c : y) EXPECT_EQ(c, cd(1, 0));
}

TEST(Fft, ConstantIsScaledImpulse) {
  const auto y = fft::fft(fft::ComplexVec<double>{1, 1, 1, 1});
  EXPECT_NEAR(std::abs(y[0] - cd(4, 0)), 0.0, 1e-15);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(std::abs(y[i]), 0.0, 1e-15);
}

TEST(Fft, InverseOfScaledImpulse) {
  const auto y = fft::ifft(fft::ComplexVec<double>{4, 0, 0, 0});
  for (const auto& c : y) EXPECT_NEAR(std::abs(c - cd(1, 0)), 0.0, 1e-15);
}

TEST(Fft, RejectsNonPowerOfTwo) {
  EXPECT_THROW(fft::fft(fft::ComplexVec<double>(3)), LengthError);
  EXPECT_THROW(fft::ifft(fft::ComplexVec<double>(12)), LengthError);
  EXPECT_THROW(fft::fft(fft::ComplexVec<double>{}), LengthError);
}

TEST(Fft, NextPow2) {
  EXPECT_EQ(fft::next_pow2(1), 1u);
  EXPECT_EQ(fft::next_pow2(8), 8u);
  EXPECT_EQ(fft::next_pow2(200), 256u);
  EXPECT_THROW(fft::next_pow2(0), DomainError);
}

TEST(Fft, MatchesDirectDftLength8) {
  Rng rng(11);
  const auto x = random_vec(rng, 8);
  EXPECT_LE(max_err(fft::fft(x), verify::naive_dft(x)), 1e-9);
  EXPECT_LE(max_err(fft::ifft(x), verify::naive_dft(x, true)), 1e-9);
}

TEST(Fft, OracleEquivalenceSmallSizes) {
  Rng rng(12);
  for (std::size_t n : {1, 2, 4, 8, 16, 32}) {
    const auto x = random_vec(rng, n);
    EXPECT_LE(max_err(fft::fft(x), verify::naive_dft(x)), 1e-9) << "n=" << n;
  }
}

TEST(Fft, RoundTripUpTo1024) {
  Rng rng(13);
  for (std::size_t n = 1; n <= 1024; n *= 2) {
    const auto x = random_vec(rng, n);
    EXPECT_LE(max_err(fft::ifft(fft::fft(x)), x), 1e-9) << "n=" << n;
  }
}

TEST(Fft, Linearity) {
  Rng rng(14);
  const std::size_t n = 64;
  const auto x = random_vec(rng, n);
  const auto y = random_vec(rng, n);
  const cd a(0.7, -0.2), b(-1.3, 0.5);
  fft::ComplexVec<double> mix(n);
  for (std::size_t i = 0; i < n; ++i) mix[i] = a * x[i] + b * y[i];
  const auto fx = fft::fft(x), fy = fft::fft(y), fm = fft::fft(mix);
  std::vector<cd> expect(n);
  for (std::size_t i = 0; i < n; ++i) expect[i] = a * fx[i] + b * fy[i];
  EXPECT_LE(max_err(fm, expect), 1e-9);
}

TEST(Fft, Parseval) {
  Rng rng(15);
  for (std::size_t n : {2, 16, 256}) {
    const auto x = random_vec(rng, n);
    const auto X = fft::fft(x);
    double time = 0.0, freq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      time += std::norm(x[i]);
      freq += std::norm(X[i]);
    }
    EXPECT_NEAR(time, freq / static_cast<double>(n), 1e-9);
  }
}

TEST(Fft, SinglePrecisionPath) {
  Rng rng(16);
  fft::ComplexVec<float> xf(32);
  fft::ComplexVec<double> xd(32);
  for (std::size_t i = 0; i < 32; ++i) {
    xd[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    xf[i] = {static_cast<float>(xd[i].real()), static_cast<float>(xd[i].imag())};
  }
  const auto yf = fft::fft(xf);
  const auto yd = verify::naive_dft(std::vector<cd>(xf.begin(), xf.end()));
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_LE(std::abs(cd(yf[i].real(), yf[i].imag()) - yd[i]), 1e-4);
  }
  const auto back = fft::ifft(yf);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_LE(std::abs(back[i] - xf[i]), 1e-4f);
}

TEST(Fft, PlanReusable) {
  fft::Plan<double> plan(8);
  Rng rng(17);
  auto x = random_vec(rng, 8);
  auto y = x;
  plan.forward(y);
  plan.inverse(y);
  EXPECT_LE(max_err(x, y), 1e-12);
}

}  // namespace
}  // namespace blockcirc
