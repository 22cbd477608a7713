#pragma once

#include <cstdint>
#include <string>

#include "rankdehaze/layers.hpp"

namespace rankdehaze::nn {

struct TrainConfig {
  double initial_lr = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 10;
  std::uint64_t rng_seed = 1;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
  /// key=value lines, one per field.
  [[nodiscard]] std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
};

/// Inverse-power decay: initial_lr * (1 + 1e-4 * iter)^-0.75.
double lr_at(std::int64_t iter, const TrainConfig& config);

/// Classical momentum: v <- momentum * v - lr * g; w <- w + v.
template <typename T>
void sgd_step(LayerParams<T>& params, const ParamGrads<T>& grads, double lr, double momentum);

}  // namespace rankdehaze::nn
