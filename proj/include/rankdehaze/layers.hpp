#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rankdehaze/tensor.hpp"

namespace rankdehaze::nn {

/// Learnable weights of a convolution or dense layer, with the momentum
/// buffers the optimizer keeps for each of them.
template <typename T>
struct LayerParams {
  std::vector<T> weights;
  std::vector<T> bias;
  std::vector<T> weight_velocity;
  std::vector<T> bias_velocity;

  /// Zeroed velocity buffers sized to the parameters.
  void reset_velocity();
  [[nodiscard]] std::size_t count() const { return weights.size() + bias.size(); }
};

template <typename T>
struct ParamGrads {
  std::vector<T> weights;
  std::vector<T> bias;
};

/// Valid (unpadded, stride 1) square-kernel convolution. Weights are laid
/// out out-channel major: [out][in][ky][kx].
template <typename T>
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  LayerParams<T> params;

  ConvLayer() = default;
  ConvLayer(int in, int out, int k);
  [[nodiscard]] Shape output_shape(const Shape& in) const;
};

/// Fully connected layer over the flattened input. Weights are [out][in].
template <typename T>
struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  LayerParams<T> params;

  DenseLayer() = default;
  DenseLayer(int in, int out);
  [[nodiscard]] Shape output_shape(const Shape& in) const;
};

struct MaxPoolLayer {
  [[nodiscard]] Shape output_shape(const Shape& in) const;
};

struct ReluLayer {
  [[nodiscard]] Shape output_shape(const Shape& in) const { return in; }
};

/// Sorts every feature map ascending (row-major fill) and remembers where
/// each output element came from. Owns no parameters.
struct RankLayer {
  [[nodiscard]] Shape output_shape(const Shape& in) const { return in; }
};

// Convolution

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvLayer<T>& layer);

template <typename T>
struct ConvBackward {
  Tensor<T> grad_input;
  ParamGrads<T> grads;
};

/// With want_input_grad = false the input gradient is left zero, which
/// saves the col2im pass for a first layer.
template <typename T>
ConvBackward<T> conv2d_backward(const Tensor<T>& input, const ConvLayer<T>& layer,
                                const Tensor<T>& grad_output, bool want_input_grad = true);

// Max pooling over non-overlapping 2x2 windows

template <typename T>
struct PoolForward {
  Tensor<T> output;
  /// Flat input index of the winning element for each output element.
  std::vector<std::int32_t> argmax;
};

template <typename T>
PoolForward<T> maxpool2x2(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool_backward(const Shape& input_shape, std::span<const std::int32_t> argmax,
                           const Tensor<T>& grad_output);

// ReLU

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output);

// Ranking

/// perm[c * N + n] is the (0-based, row-major) position inside channel c of
/// the input element that became the n-th smallest output element.
struct RankCorrespondence {
  Shape shape;
  std::vector<std::int32_t> perm;

  /// True when every channel's slice is a bijection onto {0..N-1}.
  [[nodiscard]] bool is_valid() const;
};

template <typename T>
struct RankForward {
  Tensor<T> output;
  RankCorrespondence correspondence;
};

template <typename T>
RankForward<T> rank_forward(const Tensor<T>& input);

/// Routes each output gradient back to its source: grad_in[C_n] = grad_out[n].
template <typename T>
Tensor<T> rank_backward(const Tensor<T>& grad_output, const RankCorrespondence& corr);

// Dense

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const DenseLayer<T>& layer);

template <typename T>
struct DenseBackward {
  Tensor<T> grad_input;  // same shape as the forward input
  ParamGrads<T> grads;
};

template <typename T>
DenseBackward<T> dense_backward(const Tensor<T>& input, const DenseLayer<T>& layer,
                                const Tensor<T>& grad_output);

}  // namespace rankdehaze::nn
