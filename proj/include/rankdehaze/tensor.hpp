#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankdehaze::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Channel-major (C, H, W) extent of an activation or gradient.
struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  [[nodiscard]] std::size_t plane() const {
    return static_cast<std::size_t>(height) * width;
  }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense real-valued array. Each channel is stored row-major and channels
/// are contiguous, so a flattened tensor is channel-major then row-major.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::span<T> values() { return data_; }
  [[nodiscard]] std::span<const T> values() const { return data_; }
  [[nodiscard]] std::span<T> channel(int c) {
    return std::span<T>(data_).subspan(c * shape_.plane(), shape_.plane());
  }
  [[nodiscard]] std::span<const T> channel(int c) const {
    return std::span<const T>(data_).subspan(c * shape_.plane(), shape_.plane());
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  const T& at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  [[nodiscard]] std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  void fill(T value);
  [[nodiscard]] bool all_finite() const;

  template <typename U>
  [[nodiscard]] Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

void require_shape(const Shape& actual, const Shape& expected, const char* what);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace rankdehaze::nn
