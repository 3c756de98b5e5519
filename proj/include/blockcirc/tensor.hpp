#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace blockcirc {

// Row-major dense array of doubles. Rank-2 tensors are used for matrices
// (rows x cols) and activations (sequence x features).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Rank-2 accessors.
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  Tensor transposed() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Throws ShapeError unless t has the given rank.
void require_rank(const Tensor& t, std::size_t rank, const char* what);

// Dense reference products, used as the baseline path and by tests.
Tensor dense_matvec(const Tensor& w, std::span<const double> x);
Tensor dense_matmul(const Tensor& a, const Tensor& b);

double max_abs_diff(std::span<const double> a, std::span<const double> b);
inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  return max_abs_diff(a.data(), b.data());
}

}  // namespace blockcirc
