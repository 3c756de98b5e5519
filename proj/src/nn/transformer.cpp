#include <cmath>

#include "blockcirc/error.hpp"
#include "blockcirc/nn.hpp"
#include "blockcirc/quant.hpp"

namespace blockcirc::nn {

LayerNormWeights LayerNormWeights::identity(std::size_t d) {
  return {Tensor::vector(std::vector<double>(d, 1.0)), Tensor::zeros({d})};
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank(x, 2, "layer_norm");
  const std::size_t d = x.cols();
  if (d == 0) throw ShapeError("layer_norm: feature dimension must be >= 1");
  if (gain.size() != d || bias.size() != d) {
    throw ShapeError("layer_norm: gain/bias length must equal " + std::to_string(d));
  }
  Tensor out({x.rows(), d});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    auto orow = out.row(r);
    for (std::size_t c = 0; c < d; ++c) orow[c] = (xr[c] - mean) * inv * gain[c] + bias[c];
  }
  return out;
}

Tensor feed_forward(const Tensor& x, const LinearWeight& w1, const LinearWeight& w2) {
  if (w2.in_features() != w1.out_features()) {
    throw ShapeError("feed_forward: W1 produces " + std::to_string(w1.out_features()) +
                     " features but W2 expects " + std::to_string(w2.in_features()));
  }
  Tensor hidden = w1.forward(x);
  for (double& v : hidden.values()) v = v > 0.0 ? v : 0.0;
  return w2.forward(hidden);
}

std::string to_string(Structure s) {
  return s == Structure::kEncoderDecoder ? "encoder_decoder" : "encoder_only";
}

Structure structure_from_string(const std::string& name) {
  if (name == "encoder_decoder") return Structure::kEncoderDecoder;
  if (name == "encoder_only") return Structure::kEncoderOnly;
  throw ValidationError("unknown structure '" + name +
                        "' (expected encoder_decoder or encoder_only)");
}

void TransformerConfig::validate() const {
  if (d_model == 0 || num_heads == 0 || d_ffn == 0 || vocab_size == 0 || max_seq_len == 0) {
    throw ValidationError("config: d_model, num_heads, d_ffn, vocab_size and max_seq_len must be >= 1");
  }
  if (d_model % num_heads != 0) {
    throw ValidationError("config: d_model " + std::to_string(d_model) +
                          " is not divisible by num_heads " + std::to_string(num_heads));
  }
  const std::size_t head = d_model / num_heads;
  if (d_k != head || d_v != head) {
    throw ValidationError("config: d_k and d_v must equal d_model / num_heads = " +
                          std::to_string(head));
  }
  if (!(layer_norm_eps >= 0.0)) throw ValidationError("config: layer_norm_eps must be >= 0");
}

DenseEmbedding::DenseEmbedding(Tensor table) : table_(std::move(table)) {
  require_rank(table_, 2, "embedding table");
}

void DenseEmbedding::lookup(std::size_t token, std::span<double> out) const {
  if (token >= table_.rows()) {
    throw DomainError("token id " + std::to_string(token) + " out of range for vocabulary of " +
                      std::to_string(table_.rows()));
  }
  const auto src = table_.row(token);
  std::copy(src.begin(), src.end(), out.begin());
}

std::string to_string(Precision p) {
  switch (p) {
    case Precision::kF64: return "f64";
    case Precision::kF32: return "f32";
    case Precision::kQ16: return "q16";
  }
  return "unknown";
}

Precision precision_from_string(const std::string& name) {
  if (name == "f64") return Precision::kF64;
  if (name == "f32") return Precision::kF32;
  if (name == "q16") return Precision::kQ16;
  throw UsageError("unknown precision '" + name + "' (expected f32, f64 or q16)");
}

void round_activations(Tensor& x, Precision p) {
  switch (p) {
    case Precision::kF64:
      break;
    case Precision::kF32:
      for (double& v : x.values()) v = static_cast<double>(static_cast<float>(v));
      break;
    case Precision::kQ16:
      round_trip_q16(x.data());
      break;
  }
}

Tensor sinusoidal_positions(std::size_t seq_len, std::size_t d_model) {
  Tensor pe({seq_len, d_model});
  for (std::size_t pos = 0; pos < seq_len; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double exponent = static_cast<double>(i - i % 2) / static_cast<double>(d_model);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      pe.at(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Tensor embed(const TransformerModel& model, std::span<const std::int64_t> tokens,
             const ForwardOptions& opts) {
  const TransformerConfig& cfg = model.config;
  if (tokens.empty()) throw DomainError("input sequence is empty");
  if (tokens.size() > cfg.max_seq_len) {
    throw DomainError("sequence length " + std::to_string(tokens.size()) +
                      " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  if (!model.embedding) throw ValidationError("model has no embedding table");
  Tensor x({tokens.size(), cfg.d_model});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= cfg.vocab_size) {
      throw DomainError("token id " + std::to_string(tokens[i]) + " at position " +
                        std::to_string(i) + " out of range for vocabulary of " +
                        std::to_string(cfg.vocab_size));
    }
    model.embedding->lookup(static_cast<std::size_t>(tokens[i]), x.row(i));
  }
  if (cfg.positional_encoding) {
    const Tensor pe = sinusoidal_positions(tokens.size(), cfg.d_model);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += pe[i];
  }
  round_activations(x, opts.precision);
  return x;
}

namespace {

// norm(x + sublayer), rounded to the activation precision.
Tensor residual_norm(const Tensor& x, const Tensor& sub, const LayerNormWeights& norm,
                     const TransformerConfig& cfg, const ForwardOptions& opts) {
  Tensor sum = x;
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += sub[i];
  Tensor out = layer_norm(sum, norm, cfg.layer_norm_eps);
  round_activations(out, opts.precision);
  return out;
}

}  // namespace

Tensor encoder_layer(const Tensor& x, const EncoderLayerWeights& w, const TransformerConfig& cfg,
                     const ForwardOptions& opts) {
  Tensor attn = multi_head_attention(x, x, w.self_attn, cfg.num_heads, AttentionMask::none(),
                                     opts.softmax);
  round_activations(attn, opts.precision);
  const Tensor h = residual_norm(x, attn, w.norm1, cfg, opts);
  Tensor ffn = feed_forward(h, w.ffn1, w.ffn2);
  round_activations(ffn, opts.precision);
  return residual_norm(h, ffn, w.norm2, cfg, opts);
}

Tensor decoder_layer(const Tensor& x, const Tensor& memory, const DecoderLayerWeights& w,
                     const TransformerConfig& cfg, const ForwardOptions& opts) {
  Tensor self = multi_head_attention(x, x, w.self_attn, cfg.num_heads, AttentionMask::causal(),
                                     opts.softmax);
  round_activations(self, opts.precision);
  const Tensor h1 = residual_norm(x, self, w.norm1, cfg, opts);
  Tensor cross = multi_head_attention(h1, memory, w.cross_attn, cfg.num_heads,
                                      AttentionMask::none(), opts.softmax);
  round_activations(cross, opts.precision);
  const Tensor h2 = residual_norm(h1, cross, w.norm2, cfg, opts);
  Tensor ffn = feed_forward(h2, w.ffn1, w.ffn2);
  round_activations(ffn, opts.precision);
  return residual_norm(h2, ffn, w.norm3, cfg, opts);
}

Tensor encode(const TransformerModel& model, std::span<const std::int64_t> tokens,
              const ForwardOptions& opts) {
  Tensor x = embed(model, tokens, opts);
  for (const auto& layer : model.encoder) x = encoder_layer(x, layer, model.config, opts);
  return x;
}

Tensor forward(const TransformerModel& model, std::span<const std::int64_t> source,
               std::span<const std::int64_t> target, const ForwardOptions& opts) {
  const Tensor memory = encode(model, source, opts);
  if (model.config.structure == Structure::kEncoderOnly) return memory;
  Tensor y = embed(model, target, opts);
  for (const auto& layer : model.decoder) y = decoder_layer(y, memory, layer, model.config, opts);
  return y;
}

Tensor forward(const TransformerModel& model, std::span<const std::int64_t> tokens,
               const ForwardOptions& opts) {
  return forward(model, tokens, tokens, opts);
}

Tensor logits(const TransformerModel& model, const Tensor& hidden) {
  require_rank(hidden, 2, "logits");
  if (model.output_projection) return model.output_projection->forward(hidden);
  const std::size_t vocab = model.embedding->vocab_size();
  const std::size_t d = model.embedding->dim();
  if (hidden.cols() != d) throw ShapeError("logits: hidden width does not match embedding");
  Tensor out({hidden.rows(), vocab});
  std::vector<double> row(d);
  for (std::size_t t = 0; t < vocab; ++t) {
    model.embedding->lookup(t, row);
    for (std::size_t s = 0; s < hidden.rows(); ++s) {
      const auto hs = hidden.row(s);
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += hs[c] * row[c];
      out.at(s, t) = acc;
    }
  }
  return out;
}

}  // namespace blockcirc::nn
