#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace blockcirc::fft {

template <typename T>
using ComplexVec = std::vector<std::complex<T>>;

bool is_pow2(std::size_t n) noexcept;

// Smallest power of two >= n. Throws DomainError for n == 0.
std::size_t next_pow2(std::size_t n);

// Iterative radix-2 Cooley-Tukey transform of a fixed power-of-two size.
// The bit-reversal permutation and twiddle table are built once; a plan is
// immutable afterwards and may be shared between threads.
template <typename T>
class Plan {
 public:
  explicit Plan(std::size_t n);

  std::size_t size() const noexcept { return n_; }

  // In place. Forward uses e^{-2 pi i jk/n}; inverse applies the 1/n scale.
  void forward(std::span<std::complex<T>> data) const;
  void inverse(std::span<std::complex<T>> data) const;

 private:
  void transform(std::span<std::complex<T>> data, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<T>> twiddles_;  // e^{-2 pi i k/n}, k < n/2
};

// Convenience wrappers; throw LengthError unless x.size() is a power of two.
template <typename T>
ComplexVec<T> fft(std::span<const std::complex<T>> x);
template <typename T>
ComplexVec<T> ifft(std::span<const std::complex<T>> x);

inline ComplexVec<double> fft(const ComplexVec<double>& x) {
  return fft<double>(std::span<const std::complex<double>>(x));
}
inline ComplexVec<double> ifft(const ComplexVec<double>& x) {
  return ifft<double>(std::span<const std::complex<double>>(x));
}
inline ComplexVec<float> fft(const ComplexVec<float>& x) {
  return fft<float>(std::span<const std::complex<float>>(x));
}
inline ComplexVec<float> ifft(const ComplexVec<float>& x) {
  return ifft<float>(std::span<const std::complex<float>>(x));
}

extern template class Plan<float>;
extern template class Plan<double>;

}  // namespace blockcirc::fft
