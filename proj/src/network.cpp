#include "rankdehaze/network.hpp"

#include <cmath>
#include <stdexcept>

#include "rankdehaze/rng.hpp"

namespace rankdehaze::nn {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

template <typename U, typename T>
LayerParams<U> cast_params(const LayerParams<T>& p) {
  LayerParams<U> out;
  out.weights.assign(p.weights.begin(), p.weights.end());
  out.bias.assign(p.bias.begin(), p.bias.end());
  out.weight_velocity.assign(p.weight_velocity.begin(), p.weight_velocity.end());
  out.bias_velocity.assign(p.bias_velocity.begin(), p.bias_velocity.end());
  return out;
}

template <typename T>
void add_into(std::vector<T>& dst, const std::vector<T>& src) {
  if (dst.size() != src.size()) throw ShapeError("gradient accumulate: size mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kRank: return "rank";
    case LayerKind::kDense: return "dense";
  }
  return "unknown";
}

template <typename T>
LayerKind kind_of(const Layer<T>& layer) {
  return std::visit(Overloaded{
                        [](const ConvLayer<T>&) { return LayerKind::kConv; },
                        [](const MaxPoolLayer&) { return LayerKind::kMaxPool; },
                        [](const ReluLayer&) { return LayerKind::kRelu; },
                        [](const RankLayer&) { return LayerKind::kRank; },
                        [](const DenseLayer<T>&) { return LayerKind::kDense; },
                    },
                    layer);
}

template <typename T>
void Gradients<T>::accumulate(const Gradients& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("gradient accumulate: layer count");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    add_into(layers[i].weights, other.layers[i].weights);
    add_into(layers[i].bias, other.layers[i].bias);
  }
  if (input.size() == other.input.size()) {
    for (std::size_t i = 0; i < input.size(); ++i) input[i] += other.input[i];
  }
}

template <typename T>
void Gradients<T>::scale(T factor) {
  for (auto& g : layers) {
    for (T& v : g.weights) v *= factor;
    for (T& v : g.bias) v *= factor;
  }
  for (T& v : input.values()) v *= factor;
}

template <typename T>
Network<T>::Network(Shape input_shape, std::vector<Layer<T>> layers)
    : input_shape_(input_shape), layers_(std::move(layers)) {
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      shapes_.push_back(std::visit([&](const auto& l) { return l.output_shape(shapes_.back()); },
                                   layers_[i]));
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + to_string(kind_of(layers_[i])) +
                       "): " + e.what());
    }
  }
}

template <typename T>
LayerParams<T>* Network<T>::params(std::size_t layer) {
  return std::visit(Overloaded{
                        [](ConvLayer<T>& l) -> LayerParams<T>* { return &l.params; },
                        [](DenseLayer<T>& l) -> LayerParams<T>* { return &l.params; },
                        [](auto&) -> LayerParams<T>* { return nullptr; },
                    },
                    layers_.at(layer));
}

template <typename T>
const LayerParams<T>* Network<T>::params(std::size_t layer) const {
  return const_cast<Network*>(this)->params(layer);
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (const auto* p = params(i)) n += p->count();
  }
  return n;
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    double fan_in = 0;
    double fan_out = 0;
    if (auto* conv = std::get_if<ConvLayer<T>>(&layers_[i])) {
      const double area = static_cast<double>(conv->kernel) * conv->kernel;
      fan_in = conv->in_channels * area;
      fan_out = conv->out_channels * area;
    } else if (auto* fc = std::get_if<DenseLayer<T>>(&layers_[i])) {
      fan_in = fc->inputs;
      fan_out = fc->outputs;
    } else {
      continue;
    }
    LayerParams<T>& p = *params(i);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(derive_seed(seed, i));
    for (T& w : p.weights) w = static_cast<T>((2.0 * uniform01(rng) - 1.0) * bound);
    std::fill(p.bias.begin(), p.bias.end(), T{0});
    p.reset_velocity();
  }
}

template <typename T>
void Network<T>::apply_layer(std::size_t i, const Tensor<T>& in, Tensor<T>& out,
                             std::vector<std::int32_t>* route) const {
  std::visit(Overloaded{
                 [&](const ConvLayer<T>& l) { out = conv2d(in, l); },
                 [&](const DenseLayer<T>& l) { out = dense(in, l); },
                 [&](const ReluLayer&) { out = relu(in); },
                 [&](const MaxPoolLayer&) {
                   auto r = maxpool2x2(in);
                   out = std::move(r.output);
                   if (route) *route = std::move(r.argmax);
                 },
                 [&](const RankLayer&) {
                   auto r = rank_forward(in);
                   out = std::move(r.output);
                   if (route) *route = std::move(r.correspondence.perm);
                 },
             },
             layers_[i]);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input, std::size_t stop) const {
  require_shape(input.shape(), input_shape_, "network input");
  if (stop > layers_.size()) throw std::out_of_range("forward: stop beyond last layer");
  Tensor<T> current = input;
  Tensor<T> next;
  for (std::size_t i = 0; i < stop; ++i) {
    apply_layer(i, current, next, nullptr);
    std::swap(current, next);
  }
  return current;
}

template <typename T>
void Network<T>::forward(const Tensor<T>& input, Trace<T>& trace) const {
  require_shape(input.shape(), input_shape_, "network input");
  trace.activations.resize(layers_.size() + 1);
  trace.routes.resize(layers_.size());
  trace.activations[0] = input;
  forward_from(0, trace);
}

template <typename T>
void Network<T>::forward_from(std::size_t first, Trace<T>& trace) const {
  for (std::size_t i = first; i < layers_.size(); ++i) {
    trace.routes[i].clear();
    apply_layer(i, trace.activations[i], trace.activations[i + 1], &trace.routes[i]);
  }
}

template <typename T>
Gradients<T> Network<T>::backward(const Trace<T>& trace, std::span<const T> grad_output,
                                  bool want_input_grad) const {
  if (trace.activations.size() != layers_.size() + 1) {
    throw std::invalid_argument("backward: trace does not belong to this network");
  }
  Gradients<T> grads;
  grads.layers.resize(layers_.size());
  Tensor<T> grad(shapes_.back(), std::vector<T>(grad_output.begin(), grad_output.end()));
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Tensor<T>& in = trace.activations[i];
    std::visit(Overloaded{
                   [&](const ConvLayer<T>& l) {
                     auto r = conv2d_backward(in, l, grad, want_input_grad || i > 0);
                     grad = std::move(r.grad_input);
                     grads.layers[i] = std::move(r.grads);
                   },
                   [&](const DenseLayer<T>& l) {
                     auto r = dense_backward(in, l, grad);
                     grad = std::move(r.grad_input);
                     grads.layers[i] = std::move(r.grads);
                   },
                   [&](const ReluLayer&) { grad = relu_backward(in, grad); },
                   [&](const MaxPoolLayer&) {
                     grad = maxpool_backward(in.shape(), trace.routes[i], grad);
                   },
                   [&](const RankLayer&) {
                     grad = rank_backward(grad, RankCorrespondence{in.shape(), trace.routes[i]});
                   },
               },
               layers_[i]);
  }
  if (want_input_grad) grads.input = std::move(grad);
  return grads;
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  std::vector<Layer<U>> out;
  out.reserve(layers_.size());
  for (const auto& layer : layers_) {
    std::visit(Overloaded{
                   [&](const ConvLayer<T>& l) {
                     ConvLayer<U> c;
                     c.in_channels = l.in_channels;
                     c.out_channels = l.out_channels;
                     c.kernel = l.kernel;
                     c.params = cast_params<U>(l.params);
                     out.emplace_back(std::move(c));
                   },
                   [&](const DenseLayer<T>& l) {
                     DenseLayer<U> d;
                     d.inputs = l.inputs;
                     d.outputs = l.outputs;
                     d.params = cast_params<U>(l.params);
                     out.emplace_back(std::move(d));
                   },
                   [&](const MaxPoolLayer& l) { out.emplace_back(l); },
                   [&](const ReluLayer& l) { out.emplace_back(l); },
                   [&](const RankLayer& l) { out.emplace_back(l); },
               },
               layer);
  }
  return Network<U>(input_shape_, std::move(out));
}

template class Network<float>;
template class Network<double>;
template struct Gradients<float>;
template struct Gradients<double>;
template LayerKind kind_of(const Layer<float>&);
template LayerKind kind_of(const Layer<double>&);
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;

}  // namespace rankdehaze::nn
