#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "rankdehaze/tensor.hpp"

namespace testing {

using rankdehaze::nn::Shape;
using rankdehaze::nn::Tensor;

template <typename T = double>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

/// Distinct values per tensor: a shuffled evenly spaced grid plus jitter.
inline Tensor<double> distinct_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                      double hi = 1.0) {
  Tensor<double> t(shape);
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> jitter(0.1, 0.9);
  const double step = (hi - lo) / static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[order[i]] = lo + (i + jitter(rng)) * step;
  return t;
}

/// Central difference of f with respect to each element of x.
inline std::vector<double> finite_difference(Tensor<double> x,
                                             const std::function<double(const Tensor<double>&)>& f,
                                             double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double plus = f(x);
    x[i] = orig - h;
    const double minus = f(x);
    x[i] = orig;
    g[i] = (plus - minus) / (2 * h);
  }
  return g;
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b,
                                 double floor = 1e-6) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace testing
