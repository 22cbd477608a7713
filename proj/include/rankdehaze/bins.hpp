#pragma once

#include <array>

namespace rankdehaze::net {

inline constexpr int kNumBins = 10;

/// Transmission class j in 1..10 covering (j/10 - 0.1, j/10].
struct BinLabel {
  int bin = 1;

  [[nodiscard]] int index() const { return bin - 1; }
  [[nodiscard]] std::array<float, kNumBins> one_hot() const {
    std::array<float, kNumBins> v{};
    v[index()] = 1.0f;
    return v;
  }
  friend bool operator==(const BinLabel&, const BinLabel&) = default;
};

/// Smallest j with t <= j/10. Throws std::invalid_argument unless 0 < t <= 1.
BinLabel bin_label(double t);

/// Bin midpoint (j - 0.5) / 10.
double bin_center(int bin);

}  // namespace rankdehaze::net
