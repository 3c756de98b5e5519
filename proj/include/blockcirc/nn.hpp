#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockcirc/linear.hpp"
#include "blockcirc/tensor.hpp"

namespace blockcirc::nn {

// ---------------------------------------------------------------------------
// Softmax

struct SoftmaxImpl {
  enum class Mode { kExact, kPiecewiseLinear };

  Mode mode = Mode::kExact;
  int segments = 32;  // piecewise-linear only
  double lo = -8.0;   // clamp range applied after max subtraction
  double hi = 0.0;

  static SoftmaxImpl exact() { return {}; }
  static SoftmaxImpl piecewise_linear(int segments = 32, double lo = -8.0, double hi = 0.0) {
    return {Mode::kPiecewiseLinear, segments, lo, hi};
  }
};

// exp(z) interpolated linearly between uniformly spaced knots on [lo, hi].
// Inputs below lo evaluate to exp(lo), inputs above hi to exp(hi).
class PiecewiseLinearExp {
 public:
  PiecewiseLinearExp(int segments, double lo, double hi);

  double operator()(double z) const noexcept;

  const std::vector<double>& breakpoints() const noexcept { return knots_; }
  int segments() const noexcept { return static_cast<int>(knots_.size()) - 1; }

 private:
  double lo_;
  double hi_;
  double width_;
  std::vector<double> knots_;
  std::vector<double> values_;
};

// Entries equal to -inf get probability exactly 0 under both modes.
// Throws DomainError for empty input or when every entry is -inf.
std::vector<double> softmax(std::span<const double> x, const SoftmaxImpl& impl = {});
Tensor softmax(const Tensor& x, const SoftmaxImpl& impl = {});

// ---------------------------------------------------------------------------
// Attention

struct AttentionMask {
  enum class Mode { kNone, kCausal };

  Mode mode = Mode::kNone;
  // Optional rows x cols matrix; a zero entry hides key j from query i.
  std::optional<std::vector<std::uint8_t>> allowed;

  static AttentionMask none() { return {}; }
  static AttentionMask causal() { return {Mode::kCausal, std::nullopt}; }

  bool visible(std::size_t query, std::size_t key, std::size_t num_keys) const noexcept;
};

// softmax(Q K^T / sqrt(d_k)) V. Q is s x d_k, K is s' x d_k, V is s' x d_v.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const AttentionMask& mask = {},
                                    const SoftmaxImpl& impl = {});

// Projections fused across heads: q and k are (h*d_k) x d_model, v is
// (h*d_v) x d_model, o is d_model x (h*d_v). Head i reads rows
// [i*d_k, (i+1)*d_k) of the projected queries and keys.
struct AttentionWeights {
  LinearWeight q;
  LinearWeight k;
  LinearWeight v;
  LinearWeight o;
};

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionWeights& w,
                            std::size_t num_heads, const AttentionMask& mask = {},
                            const SoftmaxImpl& impl = {});

// ---------------------------------------------------------------------------
// Position-wise layers

struct LayerNormWeights {
  Tensor gain;
  Tensor bias;

  static LayerNormWeights identity(std::size_t d);
};

inline constexpr double kLayerNormEps = 1e-5;

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);
inline Tensor layer_norm(const Tensor& x, const LayerNormWeights& w, double eps = kLayerNormEps) {
  return layer_norm(x, w.gain, w.bias, eps);
}

// relu(x W1^T + b1) W2^T + b2
Tensor feed_forward(const Tensor& x, const LinearWeight& w1, const LinearWeight& w2);

// ---------------------------------------------------------------------------
// Transformer stacks

enum class Structure { kEncoderDecoder, kEncoderOnly };

std::string to_string(Structure s);
Structure structure_from_string(const std::string& name);

struct TransformerConfig {
  std::size_t num_layers = 2;
  std::size_t d_model = 16;
  std::size_t num_heads = 2;
  std::size_t d_k = 8;
  std::size_t d_v = 8;
  std::size_t d_ffn = 64;
  std::size_t vocab_size = 32;
  Structure structure = Structure::kEncoderDecoder;
  std::size_t max_seq_len = 16;
  bool positional_encoding = true;
  double layer_norm_eps = kLayerNormEps;

  // Throws ValidationError when d_k = d_v = d_model / h does not hold exactly
  // or any dimension is zero.
  void validate() const;

  bool operator==(const TransformerConfig&) const = default;
};

struct EncoderLayerWeights {
  AttentionWeights self_attn;
  LayerNormWeights norm1;
  LinearWeight ffn1;
  LinearWeight ffn2;
  LayerNormWeights norm2;
};

struct DecoderLayerWeights {
  AttentionWeights self_attn;
  LayerNormWeights norm1;
  AttentionWeights cross_attn;
  LayerNormWeights norm2;
  LinearWeight ffn1;
  LinearWeight ffn2;
  LayerNormWeights norm3;
};

// Token embedding lookup. Kept behind an interface so the table can live
// outside the model (for example, read row by row from the weight file).
class EmbeddingTable {
 public:
  virtual ~EmbeddingTable() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t dim() const = 0;
  virtual void lookup(std::size_t token, std::span<double> out) const = 0;
};

class DenseEmbedding final : public EmbeddingTable {
 public:
  explicit DenseEmbedding(Tensor table);

  std::size_t vocab_size() const override { return table_.rows(); }
  std::size_t dim() const override { return table_.cols(); }
  void lookup(std::size_t token, std::span<double> out) const override;

  const Tensor& table() const noexcept { return table_; }

 private:
  Tensor table_;
};

struct TransformerModel {
  TransformerConfig config;
  std::shared_ptr<const EmbeddingTable> embedding;
  std::vector<EncoderLayerWeights> encoder;
  std::vector<DecoderLayerWeights> decoder;  // empty for encoder-only models
  // Maps hidden states to logits; when absent, logits use the transposed
  // embedding table.
  std::optional<LinearWeight> output_projection;
};

enum class Precision { kF64, kF32, kQ16 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& name);

struct ForwardOptions {
  SoftmaxImpl softmax;
  // Activations are rounded to this precision after the embedding and after
  // every sub-layer. Weight precision is decided when the model is built.
  Precision precision = Precision::kF64;
};

void round_activations(Tensor& x, Precision p);

Tensor sinusoidal_positions(std::size_t seq_len, std::size_t d_model);

// Embedding lookup plus (optional) sinusoidal positions. Throws DomainError
// for out-of-vocabulary tokens, empty or overlong sequences.
Tensor embed(const TransformerModel& model, std::span<const std::int64_t> tokens,
             const ForwardOptions& opts = {});

Tensor encoder_layer(const Tensor& x, const EncoderLayerWeights& w, const TransformerConfig& cfg,
                     const ForwardOptions& opts = {});
Tensor decoder_layer(const Tensor& x, const Tensor& memory, const DecoderLayerWeights& w,
                     const TransformerConfig& cfg, const ForwardOptions& opts = {});

Tensor encode(const TransformerModel& model, std::span<const std::int64_t> tokens,
              const ForwardOptions& opts = {});

// Encoder-only: hidden states of `source`. Encoder-decoder: decoder hidden
// states for `target` attending over the encoded `source`.
Tensor forward(const TransformerModel& model, std::span<const std::int64_t> source,
               std::span<const std::int64_t> target, const ForwardOptions& opts = {});
// Single-sequence form; encoder-decoder models use it as both source and target.
Tensor forward(const TransformerModel& model, std::span<const std::int64_t> tokens,
               const ForwardOptions& opts = {});

Tensor logits(const TransformerModel& model, const Tensor& hidden);

}  // namespace blockcirc::nn
