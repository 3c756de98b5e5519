#pragma once

#include <optional>
#include <variant>

#include "blockcirc/bcm.hpp"
#include "blockcirc/quant.hpp"
#include "blockcirc/tensor.hpp"

namespace blockcirc {

enum class WeightKind : std::uint8_t { kDense = 0, kBcm = 1, kQuantDense = 2, kQuantBcm = 3 };

std::string to_string(WeightKind kind);

// A linear map y = W x + bias with logical shape (out_features x in_features),
// whatever its storage. Quantized storage is dequantized once at construction
// and executed in double precision.
class LinearWeight {
 public:
  using Storage = std::variant<Tensor, BlockCirculantMatrix, QuantizedTensor, QuantizedBcm>;

  explicit LinearWeight(Storage storage, std::optional<Tensor> bias = std::nullopt);

  WeightKind kind() const noexcept { return static_cast<WeightKind>(storage_.index()); }
  std::size_t out_features() const noexcept { return out_; }
  std::size_t in_features() const noexcept { return in_; }

  const Storage& storage() const noexcept { return storage_; }
  const std::optional<Tensor>& bias() const noexcept { return bias_; }

  // x is s x in_features; returns s x out_features.
  Tensor forward(const Tensor& x) const;

  // Dense m x n matrix this weight computes (bias excluded).
  Tensor dense_equivalent() const;

  // Stored scalar count of the weight matrix (bias excluded).
  std::size_t stored_count() const;

 private:
  Storage storage_;
  std::optional<Tensor> bias_;
  std::variant<Tensor, BlockCirculantMatrix> exec_;
  std::size_t out_ = 0;
  std::size_t in_ = 0;
};

}  // namespace blockcirc
