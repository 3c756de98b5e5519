#include <cmath>
#include <limits>

#include "blockcirc/error.hpp"
#include "blockcirc/nn.hpp"

namespace blockcirc::nn {

bool AttentionMask::visible(std::size_t query, std::size_t key,
                            std::size_t num_keys) const noexcept {
  if (mode == Mode::kCausal && key > query) return false;
  if (allowed && (*allowed)[query * num_keys + key] == 0) return false;
  return true;
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const AttentionMask& mask, const SoftmaxImpl& impl) {
  require_rank(q, 2, "attention Q");
  require_rank(k, 2, "attention K");
  require_rank(v, 2, "attention V");
  if (q.cols() != k.cols()) {
    throw ShapeError("attention: Q " + shape_string(q.shape()) + " and K " +
                     shape_string(k.shape()) + " disagree on d_k");
  }
  if (k.rows() != v.rows()) {
    throw ShapeError("attention: K " + shape_string(k.shape()) + " and V " +
                     shape_string(v.shape()) + " disagree on sequence length");
  }
  const std::size_t s = q.rows();
  const std::size_t keys = k.rows();
  const std::size_t dk = q.cols();
  const std::size_t dv = v.cols();
  if (mask.allowed && mask.allowed->size() != s * keys) {
    throw ShapeError("attention: explicit mask must be " + std::to_string(s) + "x" +
                     std::to_string(keys));
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Tensor out({s, dv});
  std::vector<double> scores(keys);
  for (std::size_t i = 0; i < s; ++i) {
    const auto qi = q.row(i);
    for (std::size_t j = 0; j < keys; ++j) {
      if (!mask.visible(i, j, keys)) {
        scores[j] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const auto kj = k.row(j);
      double dot = 0.0;
      for (std::size_t c = 0; c < dk; ++c) dot += qi[c] * kj[c];
      scores[j] = dot * scale;
    }
    const auto probs = softmax(scores, impl);
    auto oi = out.row(i);
    for (std::size_t j = 0; j < keys; ++j) {
      if (probs[j] == 0.0) continue;
      const auto vj = v.row(j);
      for (std::size_t c = 0; c < dv; ++c) oi[c] += probs[j] * vj[c];
    }
  }
  return out;
}

namespace {

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  Tensor out({x.rows(), count});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto src = x.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionWeights& w,
                            std::size_t num_heads, const AttentionMask& mask,
                            const SoftmaxImpl& impl) {
  if (num_heads == 0) throw ShapeError("multi-head attention needs at least one head");
  const std::size_t qk_width = w.q.out_features();
  const std::size_t v_width = w.v.out_features();
  if (w.k.out_features() != qk_width || qk_width % num_heads != 0 ||
      v_width % num_heads != 0 || w.o.in_features() != v_width) {
    throw ShapeError("multi-head attention: projection widths (q " + std::to_string(qk_width) +
                     ", k " + std::to_string(w.k.out_features()) + ", v " +
                     std::to_string(v_width) + ", o in " + std::to_string(w.o.in_features()) +
                     ") inconsistent with " + std::to_string(num_heads) + " heads");
  }
  const std::size_t dk = qk_width / num_heads;
  const std::size_t dv = v_width / num_heads;

  const Tensor q = w.q.forward(x_q);
  const Tensor k = w.k.forward(x_kv);
  const Tensor v = w.v.forward(x_kv);

  Tensor concat({x_q.rows(), v_width});
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Tensor head = scaled_dot_product_attention(
        slice_cols(q, h * dk, dk), slice_cols(k, h * dk, dk), slice_cols(v, h * dv, dv), mask,
        impl);
    for (std::size_t r = 0; r < head.rows(); ++r) {
      const auto src = head.row(r);
      std::copy(src.begin(), src.end(), concat.row(r).begin() + h * dv);
    }
  }
  return w.o.forward(concat);
}

}  // namespace blockcirc::nn
