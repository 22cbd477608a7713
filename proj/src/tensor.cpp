#include "rankdehaze/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace rankdehaze::nn {

std::string Shape::str() const {
  return "(" + std::to_string(channels) + "x" + std::to_string(height) + "x" +
         std::to_string(width) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape), data_(shape.size(), fill) {
  if (shape.channels < 0 || shape.height < 0 || shape.width < 0) {
    throw ShapeError("negative tensor extent " + shape.str());
  }
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.str());
  }
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

void require_shape(const Shape& actual, const Shape& expected, const char* what) {
  if (actual != expected) {
    throw ShapeError(std::string(what) + ": expected shape " + expected.str() + ", got " +
                     actual.str());
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace rankdehaze::nn
