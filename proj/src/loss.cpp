#include "rankdehaze/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rankdehaze::nn {

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  const T peak = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T total{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    total += p[i];
  }
  for (T& v : p) v /= total;
  return p;
}

template <typename T>
LossResult<T> softmax_xent(std::span<const T> logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw std::invalid_argument("softmax_xent: target class " + std::to_string(target) +
                                " outside [0, " + std::to_string(logits.size()) + ")");
  }
  const T peak = *std::max_element(logits.begin(), logits.end());
  T total{0};
  for (T v : logits) total += std::exp(v - peak);
  const T log_total = std::log(total);

  LossResult<T> r;
  r.loss = log_total - (logits[target] - peak);
  if (r.loss < T{0}) r.loss = T{0};
  r.grad.resize(logits.size());
  // The target component is minus the sum of the others, so the gradient
  // sums to zero when accumulated in index order.
  T others{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (static_cast<int>(i) == target) continue;
    r.grad[i] = std::exp(logits[i] - peak - log_total);
    others += r.grad[i];
  }
  r.grad[target] = -others;
  return r;
}

template <typename T>
LossResult<T> squared_error(std::span<const T> prediction, T target) {
  if (prediction.size() != 1) throw std::invalid_argument("squared_error: expects one output");
  const T diff = prediction[0] - target;
  return {T{0.5} * diff * diff, {diff}};
}

template std::vector<float> softmax(std::span<const float>);
template std::vector<double> softmax(std::span<const double>);
template LossResult<float> softmax_xent(std::span<const float>, int);
template LossResult<double> softmax_xent(std::span<const double>, int);
template LossResult<float> squared_error(std::span<const float>, float);
template LossResult<double> squared_error(std::span<const double>, double);

}  // namespace rankdehaze::nn
