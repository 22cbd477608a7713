#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "rankdehaze/forest.hpp"
#include "rankdehaze/image.hpp"
#include "rankdehaze/ranking_net.hpp"

namespace rankdehaze::dehaze {

using image::Plane;
using image::RgbImage;
using image::TransmissionMap;

/// Global atmospheric light, each channel in (0, 1].
using Atmosphere = std::array<double, 3>;

inline constexpr double kAtmosphereFloor = 1e-3;
/// Lower bound for refined transmission values.
inline constexpr float kTransmissionFloor = 1e-3f;
/// Recovery divides by max(t, kRecoveryFloor).
inline constexpr double kRecoveryFloor = 0.05;
/// Upper bound for the exposure factor.
inline constexpr double kMaxExposure = 10.0;

class DehazeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimum over RGB and a window x window neighbourhood, clipped at borders.
Plane dark_channel(const RgbImage& image, int window = 15);

/// Mean colour of the max(1, ceil(0.1% of pixels)) pixels with the brightest
/// dark channel; ties go to the lower row-major index.
Atmosphere estimate_atmospheric_light(const RgbImage& image, int window = 15);

/// Divides channel c by A[c]. Not clamped.
RgbImage white_balance(const RgbImage& image, const Atmosphere& a);

struct TransmissionOptions {
  /// Predict every stride-th pixel per axis, fill the rest from the nearest.
  int stride = 1;
  int threads = 1;
  net::FeatureLayer feature_layer = net::FeatureLayer::kFc2;
};

/// Per-pixel forest regression on the CNN features of the 20x20 patch
/// covering x-10..x+9, y-10..y+9 (mirrored at borders).
TransmissionMap transmission_map(const RgbImage& balanced, const net::RankingCnn& model,
                                 const rf::Forest& forest, const TransmissionOptions& options = {});

/// Guided filter with box windows of side 2r+1 (clipped at borders).
/// Output is clamped into [kTransmissionFloor, 1].
Plane guided_filter(const Plane& guide, const Plane& target, int radius = 40, double eps = 1e-3);

/// Same filter without the final clamp.
Plane guided_filter_raw(const Plane& guide, const Plane& target, int radius, double eps);

/// Mean over the clipped (2r+1)^2 window around each pixel.
Plane box_mean(const Plane& p, int radius);

/// J = (I - A) / max(t, 0.05) + A, not clamped.
RgbImage recover_unclamped(const RgbImage& image, const Atmosphere& a, const TransmissionMap& t);
/// Same, clamped to [0, 1].
RgbImage recover(const RgbImage& image, const Atmosphere& a, const TransmissionMap& t);

struct Exposure {
  RgbImage image;
  double lambda = 1.0;
  bool capped = false;
};

/// lambda = log(sum I^l / sum J^l) + 1 on Rec.601 luminance, floored at 1
/// and capped at kMaxExposure; J* = lambda J clamped to [0, 1].
double exposure_factor(const RgbImage& recovered, const RgbImage& hazy, bool* capped = nullptr);
Exposure exposure_adjust(const RgbImage& recovered, const RgbImage& hazy);

struct DehazeOptions {
  int dark_window = 15;
  int guided_radius = 40;
  double guided_eps = 1e-3;
  bool adjust_exposure = true;
  TransmissionOptions transmission;
};

struct DehazeResult {
  RgbImage output;     ///< after exposure adjustment
  RgbImage recovered;  ///< before exposure adjustment
  Atmosphere atmosphere{};
  TransmissionMap raw_transmission;
  TransmissionMap transmission;  ///< refined
  double lambda = 1.0;
};

/// Atmospheric light, white balance, transmission, guided filter, recovery
/// on the original image, exposure. Failures are rethrown as DehazeError
/// naming the stage.
DehazeResult dehaze(const RgbImage& hazy, const net::RankingCnn& model, const rf::Forest& forest,
                    const DehazeOptions& options = {});

/// "A = r g b" text file.
void write_atmosphere(const std::filesystem::path& path, const Atmosphere& a);

}  // namespace rankdehaze::dehaze
