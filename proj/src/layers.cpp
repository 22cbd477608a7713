#include "rankdehaze/layers.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

namespace rankdehaze::nn {

namespace {

// Lowers the convolution input to a (Cin*k*k) x (OH*OW) matrix.
template <typename T>
void im2col(const Tensor<T>& input, int k, int out_h, int out_w, std::vector<T>& cols) {
  const Shape& s = input.shape();
  const std::size_t positions = static_cast<std::size_t>(out_h) * out_w;
  cols.resize(static_cast<std::size_t>(s.channels) * k * k * positions);
  std::size_t row = 0;
  for (int c = 0; c < s.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        T* dst = cols.data() + row * positions;
        for (int y = 0; y < out_h; ++y) {
          const T* src = &input.at(c, y + ky, kx);
          std::copy(src, src + out_w, dst + static_cast<std::size_t>(y) * out_w);
        }
      }
    }
  }
}

template <typename T>
void check_conv_input(const Shape& in, const ConvLayer<T>& layer) {
  if (in.channels != layer.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(in.channels) +
                     " channels, layer expects " + std::to_string(layer.in_channels));
  }
  if (in.height < layer.kernel || in.width < layer.kernel) {
    throw ShapeError("conv2d: input " + in.str() + " smaller than kernel " +
                     std::to_string(layer.kernel));
  }
}

}  // namespace

template <typename T>
void LayerParams<T>::reset_velocity() {
  weight_velocity.assign(weights.size(), T{0});
  bias_velocity.assign(bias.size(), T{0});
}

template <typename T>
ConvLayer<T>::ConvLayer(int in, int out, int k) : in_channels(in), out_channels(out), kernel(k) {
  params.weights.assign(static_cast<std::size_t>(out) * in * k * k, T{0});
  params.bias.assign(out, T{0});
  params.reset_velocity();
}

template <typename T>
Shape ConvLayer<T>::output_shape(const Shape& in) const {
  check_conv_input(in, *this);
  return {out_channels, in.height - kernel + 1, in.width - kernel + 1};
}

template <typename T>
DenseLayer<T>::DenseLayer(int in, int out) : inputs(in), outputs(out) {
  params.weights.assign(static_cast<std::size_t>(out) * in, T{0});
  params.bias.assign(out, T{0});
  params.reset_velocity();
}

template <typename T>
Shape DenseLayer<T>::output_shape(const Shape& in) const {
  if (in.size() != static_cast<std::size_t>(inputs)) {
    throw ShapeError("dense: input " + in.str() + " has " + std::to_string(in.size()) +
                     " elements, layer expects " + std::to_string(inputs));
  }
  return {outputs, 1, 1};
}

Shape MaxPoolLayer::output_shape(const Shape& in) const {
  if (in.height % 2 != 0 || in.width % 2 != 0) {
    throw ShapeError("maxpool2x2: odd spatial extent " + in.str());
  }
  return {in.channels, in.height / 2, in.width / 2};
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvLayer<T>& layer) {
  const Shape out_shape = layer.output_shape(input.shape());
  const std::size_t positions = out_shape.plane();
  const std::size_t taps = static_cast<std::size_t>(layer.in_channels) * layer.kernel * layer.kernel;
  std::vector<T> cols;
  im2col(input, layer.kernel, out_shape.height, out_shape.width, cols);

  Tensor<T> out(out_shape);
  for (int oc = 0; oc < layer.out_channels; ++oc) {
    T* dst = out.channel(oc).data();
    std::fill(dst, dst + positions, layer.params.bias[oc]);
    const T* w = layer.params.weights.data() + oc * taps;
    for (std::size_t t = 0; t < taps; ++t) {
      const T wt = w[t];
      const T* src = cols.data() + t * positions;
      for (std::size_t p = 0; p < positions; ++p) dst[p] += wt * src[p];
    }
  }
  return out;
}

template <typename T>
ConvBackward<T> conv2d_backward(const Tensor<T>& input, const ConvLayer<T>& layer,
                                const Tensor<T>& grad_output, bool want_input_grad) {
  const Shape out_shape = layer.output_shape(input.shape());
  require_shape(grad_output.shape(), out_shape, "conv2d_backward grad_output");
  const int k = layer.kernel;
  const int out_w = out_shape.width;
  const std::size_t positions = out_shape.plane();
  const std::size_t taps = static_cast<std::size_t>(layer.in_channels) * k * k;

  // Position-major copy of the lowered input so both products below stream
  // contiguously over taps.
  std::vector<T> cols;
  im2col(input, k, out_shape.height, out_w, cols);
  std::vector<T> cols_t(cols.size());
  for (std::size_t t = 0; t < taps; ++t) {
    for (std::size_t p = 0; p < positions; ++p) cols_t[p * taps + t] = cols[t * positions + p];
  }

  ConvBackward<T> result{Tensor<T>(input.shape()), {}};
  result.grads.weights.assign(layer.params.weights.size(), T{0});
  result.grads.bias.assign(layer.out_channels, T{0});
  std::vector<T> grad_cols_t(cols.size(), T{0});

  for (int oc = 0; oc < layer.out_channels; ++oc) {
    const T* g = grad_output.channel(oc).data();
    T* gw = result.grads.weights.data() + oc * taps;
    const T* w = layer.params.weights.data() + oc * taps;
    T bias_sum{0};
    for (std::size_t p = 0; p < positions; ++p) {
      const T gp = g[p];
      bias_sum += gp;
      if (gp == T{0}) continue;
      const T* col = cols_t.data() + p * taps;
      T* gcol = grad_cols_t.data() + p * taps;
      for (std::size_t t = 0; t < taps; ++t) gw[t] += gp * col[t];
      if (!want_input_grad) continue;
      for (std::size_t t = 0; t < taps; ++t) gcol[t] += gp * w[t];
    }
    result.grads.bias[oc] = bias_sum;
  }

  if (!want_input_grad) return result;
  // col2im: scatter the lowered gradient back onto the input grid.
  Tensor<T>& gin = result.grad_input;
  std::size_t t = 0;
  for (int c = 0; c < layer.in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++t) {
        for (int y = 0; y < out_shape.height; ++y) {
          T* dst = &gin.at(c, y + ky, kx);
          const std::size_t base = static_cast<std::size_t>(y) * out_w;
          for (int x = 0; x < out_w; ++x) dst[x] += grad_cols_t[(base + x) * taps + t];
        }
      }
    }
  }
  return result;
}

template <typename T>
PoolForward<T> maxpool2x2(const Tensor<T>& input) {
  const Shape in = input.shape();
  const Shape out_shape = MaxPoolLayer{}.output_shape(in);
  PoolForward<T> result{Tensor<T>(out_shape), std::vector<std::int32_t>(out_shape.size())};
  std::size_t o = 0;
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out_shape.height; ++y) {
      for (int x = 0; x < out_shape.width; ++x, ++o) {
        // Row-major window scan; strict '>' keeps the first maximum on ties.
        std::size_t best = input.index(c, 2 * y, 2 * x);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t i = input.index(c, 2 * y + dy, 2 * x + dx);
            if (input[i] > input[best]) best = i;
          }
        }
        result.output[o] = input[best];
        result.argmax[o] = static_cast<std::int32_t>(best);
      }
    }
  }
  return result;
}

template <typename T>
Tensor<T> maxpool_backward(const Shape& input_shape, std::span<const std::int32_t> argmax,
                           const Tensor<T>& grad_output) {
  require_shape(grad_output.shape(), MaxPoolLayer{}.output_shape(input_shape),
                "maxpool_backward grad_output");
  if (argmax.size() != grad_output.size()) {
    throw ShapeError("maxpool_backward: argmax length does not match grad_output");
  }
  Tensor<T> grad_in(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    const auto i = static_cast<std::size_t>(argmax[o]);
    if (i >= grad_in.size()) throw ShapeError("maxpool_backward: argmax index out of range");
    grad_in[i] += grad_output[o];
  }
  return grad_in;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output) {
  require_shape(grad_output.shape(), input.shape(), "relu_backward grad_output");
  Tensor<T> grad_in(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    grad_in[i] = input[i] > T{0} ? grad_output[i] : T{0};
  }
  return grad_in;
}

bool RankCorrespondence::is_valid() const {
  const std::size_t n = shape.plane();
  if (perm.size() != shape.size()) return false;
  std::vector<char> seen(n);
  for (int c = 0; c < shape.channels; ++c) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
      const std::int32_t src = perm[c * n + k];
      if (src < 0 || static_cast<std::size_t>(src) >= n || seen[src]) return false;
      seen[src] = 1;
    }
  }
  return true;
}

template <typename T>
RankForward<T> rank_forward(const Tensor<T>& input) {
  const Shape s = input.shape();
  const std::size_t n = s.plane();
  RankForward<T> result{Tensor<T>(s), RankCorrespondence{s, std::vector<std::int32_t>(s.size())}};
  std::vector<std::pair<T, std::int32_t>> keyed(n);
  for (int c = 0; c < s.channels; ++c) {
    const auto in = input.channel(c);
    for (std::size_t i = 0; i < n; ++i) keyed[i] = {in[i], static_cast<std::int32_t>(i)};
    // Ordering by (value, index) is a stable sort on value.
    std::sort(keyed.begin(), keyed.end());
    auto out = result.output.channel(c);
    std::int32_t* perm = result.correspondence.perm.data() + c * n;
    for (std::size_t k = 0; k < n; ++k) {
      out[k] = keyed[k].first;
      perm[k] = keyed[k].second;
    }
  }
  return result;
}

template <typename T>
Tensor<T> rank_backward(const Tensor<T>& grad_output, const RankCorrespondence& corr) {
  require_shape(grad_output.shape(), corr.shape, "rank_backward grad_output");
  if (!corr.is_valid()) {
    throw std::invalid_argument("rank_backward: correspondence is not a permutation");
  }
  const std::size_t n = corr.shape.plane();
  Tensor<T> grad_in(corr.shape);
  for (int c = 0; c < corr.shape.channels; ++c) {
    const auto g = grad_output.channel(c);
    auto dst = grad_in.channel(c);
    const std::int32_t* perm = corr.perm.data() + c * n;
    for (std::size_t k = 0; k < n; ++k) dst[perm[k]] = g[k];
  }
  return grad_in;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const DenseLayer<T>& layer) {
  const Shape out_shape = layer.output_shape(input.shape());
  Tensor<T> out(out_shape);
  const T* x = input.values().data();
  for (int o = 0; o < layer.outputs; ++o) {
    const T* w = layer.params.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
    T acc = layer.params.bias[o];
    for (int i = 0; i < layer.inputs; ++i) acc += w[i] * x[i];
    out[o] = acc;
  }
  return out;
}

template <typename T>
DenseBackward<T> dense_backward(const Tensor<T>& input, const DenseLayer<T>& layer,
                                const Tensor<T>& grad_output) {
  require_shape(grad_output.shape(), layer.output_shape(input.shape()),
                "dense_backward grad_output");
  DenseBackward<T> result{Tensor<T>(input.shape()), {}};
  result.grads.weights.assign(layer.params.weights.size(), T{0});
  result.grads.bias.assign(grad_output.values().begin(), grad_output.values().end());
  const T* x = input.values().data();
  T* gx = result.grad_input.values().data();
  for (int o = 0; o < layer.outputs; ++o) {
    const T g = grad_output[o];
    if (g == T{0}) continue;
    const std::size_t row = static_cast<std::size_t>(o) * layer.inputs;
    const T* w = layer.params.weights.data() + row;
    T* gw = result.grads.weights.data() + row;
    for (int i = 0; i < layer.inputs; ++i) {
      gw[i] = g * x[i];
      gx[i] += g * w[i];
    }
  }
  return result;
}

#define RANKDEHAZE_INSTANTIATE_LAYERS(T)                                                     \
  template struct LayerParams<T>;                                                            \
  template struct ConvLayer<T>;                                                              \
  template struct DenseLayer<T>;                                                             \
  template Tensor<T> conv2d(const Tensor<T>&, const ConvLayer<T>&);                          \
  template ConvBackward<T> conv2d_backward(const Tensor<T>&, const ConvLayer<T>&,            \
                                           const Tensor<T>&, bool);                          \
  template PoolForward<T> maxpool2x2(const Tensor<T>&);                                      \
  template Tensor<T> maxpool_backward(const Shape&, std::span<const std::int32_t>,           \
                                      const Tensor<T>&);                                     \
  template Tensor<T> relu(const Tensor<T>&);                                                 \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                      \
  template RankForward<T> rank_forward(const Tensor<T>&);                                    \
  template Tensor<T> rank_backward(const Tensor<T>&, const RankCorrespondence&);             \
  template Tensor<T> dense(const Tensor<T>&, const DenseLayer<T>&);                          \
  template DenseBackward<T> dense_backward(const Tensor<T>&, const DenseLayer<T>&,           \
                                           const Tensor<T>&);

RANKDEHAZE_INSTANTIATE_LAYERS(float)
RANKDEHAZE_INSTANTIATE_LAYERS(double)

}  // namespace rankdehaze::nn
