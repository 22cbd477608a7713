#pragma once

#include <span>
#include <vector>

namespace rankdehaze::nn {

template <typename T>
struct LossResult {
  T loss{};
  std::vector<T> grad;
};

/// Soft-max cross-entropy against a 0-based target class. The maximum logit
/// is subtracted before exponentiation.
template <typename T>
LossResult<T> softmax_xent(std::span<const T> logits, int target);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

/// 0.5 * (prediction - target)^2 with gradient (prediction - target).
template <typename T>
LossResult<T> squared_error(std::span<const T> prediction, T target);

}  // namespace rankdehaze::nn
