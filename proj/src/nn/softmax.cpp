#include <algorithm>
#include <cmath>
#include <limits>

#include "blockcirc/error.hpp"
#include "blockcirc/nn.hpp"

namespace blockcirc::nn {

PiecewiseLinearExp::PiecewiseLinearExp(int segments, double lo, double hi)
    : lo_(lo), hi_(hi) {
  if (segments < 2) throw DomainError("piecewise-linear exp needs >= 2 segments");
  if (!(lo < hi)) throw DomainError("piecewise-linear exp needs lo < hi");
  width_ = (hi - lo) / segments;
  knots_.resize(segments + 1);
  values_.resize(segments + 1);
  for (int i = 0; i <= segments; ++i) {
    knots_[i] = i == segments ? hi : lo + width_ * i;
    values_[i] = std::exp(knots_[i]);
  }
}

double PiecewiseLinearExp::operator()(double z) const noexcept {
  if (z <= lo_) return values_.front();
  if (z >= hi_) return values_.back();
  const double t = (z - lo_) / width_;
  const std::size_t last = values_.size() - 2;
  const std::size_t k = std::min(static_cast<std::size_t>(t), last);
  const double frac = (z - knots_[k]) / (knots_[k + 1] - knots_[k]);
  return values_[k] + (values_[k + 1] - values_[k]) * frac;
}

std::vector<double> softmax(std::span<const double> x, const SoftmaxImpl& impl) {
  if (x.empty()) throw DomainError("softmax of an empty vector");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(x.begin(), x.end());
  if (peak == kNegInf) throw DomainError("softmax: every entry is masked");

  std::vector<double> out(x.size());
  if (impl.mode == SoftmaxImpl::Mode::kExact) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = x[i] == kNegInf ? 0.0 : std::exp(x[i] - peak);
    }
  } else {
    const PiecewiseLinearExp approx(impl.segments, impl.lo, impl.hi);
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = x[i] == kNegInf ? 0.0 : approx(x[i] - peak);
    }
  }
  double total = 0.0;
  for (double v : out) total += v;
  for (double& v : out) v /= total;
  return out;
}

Tensor softmax(const Tensor& x, const SoftmaxImpl& impl) {
  require_rank(x, 1, "softmax");
  return Tensor::vector(softmax(x.data(), impl));
}

}  // namespace blockcirc::nn
