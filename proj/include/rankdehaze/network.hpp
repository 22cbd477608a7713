#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rankdehaze/layers.hpp"

namespace rankdehaze::nn {

enum class LayerKind : std::uint8_t { kConv = 1, kMaxPool = 2, kRelu = 3, kRank = 4, kDense = 5 };

std::string to_string(LayerKind kind);

template <typename T>
using Layer = std::variant<ConvLayer<T>, MaxPoolLayer, ReluLayer, RankLayer, DenseLayer<T>>;

template <typename T>
LayerKind kind_of(const Layer<T>& layer);

/// Per-sample record of a forward pass, consumed by backward.
template <typename T>
struct Trace {
  /// activations[i] is the input of layer i; activations.back() the output.
  std::vector<Tensor<T>> activations;
  /// Pool argmax or rank correspondence for the matching layer, else empty.
  std::vector<std::vector<std::int32_t>> routes;
};

template <typename T>
struct Gradients {
  /// One entry per layer; empty for parameter-free layers.
  std::vector<ParamGrads<T>> layers;
  Tensor<T> input;

  /// Element-wise this += other (shapes must match).
  void accumulate(const Gradients& other);
  void scale(T factor);
};

/// Feed-forward stack of layers with a fixed input shape. Construction
/// checks that every layer's output shape feeds the next one.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::vector<Layer<T>> layers);

  [[nodiscard]] const Shape& input_shape() const { return input_shape_; }
  [[nodiscard]] const std::vector<Layer<T>>& layers() const { return layers_; }
  [[nodiscard]] std::size_t depth() const { return layers_.size(); }
  /// Output shape of layer i (i.e. input shape of layer i + 1).
  [[nodiscard]] const Shape& output_shape(std::size_t i) const { return shapes_[i + 1]; }
  [[nodiscard]] const Shape& output_shape() const { return shapes_.back(); }

  [[nodiscard]] LayerParams<T>* params(std::size_t layer);
  [[nodiscard]] const LayerParams<T>* params(std::size_t layer) const;
  [[nodiscard]] std::size_t parameter_count() const;

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero bias,
  /// zero velocity. Layers draw from per-layer substreams of `seed`.
  void initialize(std::uint64_t seed);

  /// Runs layers [0, stop) and returns the activation after layer stop-1.
  [[nodiscard]] Tensor<T> forward(const Tensor<T>& input, std::size_t stop) const;
  [[nodiscard]] Tensor<T> forward(const Tensor<T>& input) const {
    return forward(input, layers_.size());
  }
  /// Full pass that records everything backward needs.
  void forward(const Tensor<T>& input, Trace<T>& trace) const;
  /// Recomputes trace entries from layer `first` onwards, reading
  /// trace.activations[first] as that layer's input.
  void forward_from(std::size_t first, Trace<T>& trace) const;

  /// Backpropagates d(loss)/d(output) through the recorded pass. Without
  /// want_input_grad, Gradients::input is left empty.
  [[nodiscard]] Gradients<T> backward(const Trace<T>& trace, std::span<const T> grad_output,
                                      bool want_input_grad = true) const;

  template <typename U>
  [[nodiscard]] Network<U> cast() const;

 private:
  void apply_layer(std::size_t i, const Tensor<T>& in, Tensor<T>& out,
                   std::vector<std::int32_t>* route) const;

  Shape input_shape_;
  std::vector<Layer<T>> layers_;
  std::vector<Shape> shapes_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace rankdehaze::nn
