#include "rankdehaze/bins.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rankdehaze::net {

BinLabel bin_label(double t) {
  if (!(t > 0.0 && t <= 1.0)) {
    throw std::invalid_argument("transmission " + std::to_string(t) + " outside (0, 1]");
  }
  // ceil(10 t) can land one bin off near the boundaries because i/10 is not
  // exact in binary; compare against i/10 computed the same way as the
  // interval definition.
  int j = static_cast<int>(std::ceil(t * kNumBins));
  j = std::clamp(j, 1, kNumBins);
  while (j > 1 && t <= static_cast<double>(j - 1) / kNumBins) --j;
  while (j < kNumBins && t > static_cast<double>(j) / kNumBins) ++j;
  return {j};
}

double bin_center(int bin) { return (bin - 0.5) / kNumBins; }

}  // namespace rankdehaze::net
