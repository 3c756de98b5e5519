#include "blockcirc/fft.hpp"

#include <bit>
#include <numbers>
#include <string>
#include <utility>

#include "blockcirc/error.hpp"

namespace blockcirc::fft {

bool is_pow2(std::size_t n) noexcept { return std::has_single_bit(n); }

std::size_t next_pow2(std::size_t n) {
  if (n == 0) throw DomainError("next_pow2: n must be >= 1");
  return std::bit_ceil(n);
}

template <typename T>
Plan<T>::Plan(std::size_t n) : n_(n), bitrev_(n), twiddles_(n / 2) {
  if (!is_pow2(n)) {
    throw LengthError("fft: length " + std::to_string(n) + " is not a power of two");
  }
  const int bits = std::countr_zero(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bitrev_[i] = r;
  }
  // Each twiddle is evaluated directly in double; a recurrence would
  // accumulate rounding error across the table.
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
    twiddles_[k] = std::complex<T>(static_cast<T>(std::cos(angle)),
                                   static_cast<T>(std::sin(angle)));
  }
}

template <typename T>
void Plan<T>::forward(std::span<std::complex<T>> data) const {
  transform(data, false);
}

template <typename T>
void Plan<T>::inverse(std::span<std::complex<T>> data) const {
  transform(data, true);
  const T scale = T(1) / static_cast<T>(n_);
  for (auto& v : data) v *= scale;
}

template <typename T>
void Plan<T>::transform(std::span<std::complex<T>> data, bool inverse) const {
  if (data.size() != n_) {
    throw LengthError("fft: plan size " + std::to_string(n_) + " applied to length " +
                      std::to_string(data.size()));
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        std::complex<T> w = twiddles_[k * stride];
        if (inverse) w = std::conj(w);
        const std::complex<T> u = data[start + k];
        const std::complex<T> v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

template <typename T>
ComplexVec<T> fft(std::span<const std::complex<T>> x) {
  Plan<T> plan(x.size());
  ComplexVec<T> out(x.begin(), x.end());
  plan.forward(out);
  return out;
}

template <typename T>
ComplexVec<T> ifft(std::span<const std::complex<T>> x) {
  Plan<T> plan(x.size());
  ComplexVec<T> out(x.begin(), x.end());
  plan.inverse(out);
  return out;
}

template class Plan<float>;
template class Plan<double>;
template ComplexVec<float> fft<float>(std::span<const std::complex<float>>);
template ComplexVec<double> fft<double>(std::span<const std::complex<double>>);
template ComplexVec<float> ifft<float>(std::span<const std::complex<float>>);
template ComplexVec<double> ifft<double>(std::span<const std::complex<double>>);

}  // namespace blockcirc::fft
