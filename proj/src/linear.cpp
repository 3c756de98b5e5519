#include "blockcirc/linear.hpp"

#include "blockcirc/error.hpp"

namespace blockcirc {

std::string to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::kDense: return "dense";
    case WeightKind::kBcm: return "bcm";
    case WeightKind::kQuantDense: return "quant-dense";
    case WeightKind::kQuantBcm: return "quant-bcm";
  }
  return "unknown";
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

LinearWeight::LinearWeight(Storage storage, std::optional<Tensor> bias)
    : storage_(std::move(storage)), bias_(std::move(bias)) {
  exec_ = std::visit(
      Overloaded{
          [](const Tensor& w) -> std::variant<Tensor, BlockCirculantMatrix> {
            require_rank(w, 2, "linear weight");
            return w;
          },
          [](const BlockCirculantMatrix& m) -> std::variant<Tensor, BlockCirculantMatrix> {
            return m;
          },
          [](const QuantizedTensor& q) -> std::variant<Tensor, BlockCirculantMatrix> {
            Tensor w = blockcirc::dequantize(q);
            require_rank(w, 2, "linear weight");
            return w;
          },
          [](const QuantizedBcm& q) -> std::variant<Tensor, BlockCirculantMatrix> {
            return q.dequantize();
          },
      },
      storage_);
  std::visit(Overloaded{
                 [this](const Tensor& w) {
                   out_ = w.rows();
                   in_ = w.cols();
                 },
                 [this](const BlockCirculantMatrix& m) {
                   out_ = m.rows();
                   in_ = m.cols();
                 },
             },
             exec_);
  if (bias_) {
    require_rank(*bias_, 1, "linear bias");
    if (bias_->size() != out_) {
      throw ShapeError("linear bias length " + std::to_string(bias_->size()) +
                       " != out_features " + std::to_string(out_));
    }
  }
}

Tensor LinearWeight::forward(const Tensor& x) const {
  require_rank(x, 2, "linear forward");
  if (x.cols() != in_) {
    throw ShapeError("linear forward: input " + shape_string(x.shape()) + " expects " +
                     std::to_string(in_) + " features");
  }
  Tensor y = std::visit(Overloaded{
                            [&](const Tensor& w) {
                              Tensor out({x.rows(), out_});
                              for (std::size_t s = 0; s < x.rows(); ++s) {
                                const auto xs = x.row(s);
                                auto ys = out.row(s);
                                for (std::size_t r = 0; r < out_; ++r) {
                                  const auto wr = w.row(r);
                                  double acc = 0.0;
                                  for (std::size_t c = 0; c < in_; ++c) acc += wr[c] * xs[c];
                                  ys[r] = acc;
                                }
                              }
                              return out;
                            },
                            [&](const BlockCirculantMatrix& m) { return m.apply_rows(x); },
                        },
                        exec_);
  if (bias_) {
    for (std::size_t s = 0; s < y.rows(); ++s) {
      auto ys = y.row(s);
      for (std::size_t r = 0; r < out_; ++r) ys[r] += (*bias_)[r];
    }
  }
  return y;
}

Tensor LinearWeight::dense_equivalent() const {
  return std::visit(Overloaded{
                        [](const Tensor& w) { return w; },
                        [](const BlockCirculantMatrix& m) { return m.expand(); },
                    },
                    exec_);
}

std::size_t LinearWeight::stored_count() const {
  return std::visit(Overloaded{
                        [](const Tensor& w) { return w.size(); },
                        [](const BlockCirculantMatrix& m) { return m.stored_count(); },
                        [](const QuantizedTensor& q) { return q.raw.size(); },
                        [](const QuantizedBcm& q) { return q.index.raw.size(); },
                    },
                    storage_);
}

}  // namespace blockcirc
