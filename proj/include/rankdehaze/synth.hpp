#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rankdehaze/bins.hpp"
#include "rankdehaze/image.hpp"
#include "rankdehaze/tensor.hpp"

namespace rankdehaze::synth {

inline constexpr int kPatchSize = 20;

/// Clear patch, its hazy version under constant transmission with white
/// atmospheric light, and the transmission class.
struct PatchSample {
  nn::Tensor<float> clear;
  nn::Tensor<float> hazy;
  double transmission = 1.0;
  net::BinLabel label;

  friend bool operator==(const PatchSample&, const PatchSample&) = default;
};

struct Provenance {
  std::vector<std::string> sources;
  std::uint64_t seed = 0;
  std::uint64_t clear_patches = 0;
  std::uint32_t per_patch = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct PatchDataset {
  std::vector<PatchSample> samples;
  Provenance provenance;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] std::array<std::size_t, net::kNumBins> bin_histogram() const;

  friend bool operator==(const PatchDataset&, const PatchDataset&) = default;
};

/// Draws `count` size x size patches: a uniformly chosen image, then a
/// uniformly chosen top-left corner. Patch i uses substream i of `seed`.
/// Images smaller than the patch are skipped with a warning on stderr;
/// throws std::invalid_argument when none is usable.
std::vector<nn::Tensor<float>> sample_clear_patches(std::span<const image::RgbImage> images,
                                                    std::size_t count, std::uint64_t seed,
                                                    int size = kPatchSize);

/// I = J t + A (1 - t) per channel, evaluated in double and rounded once.
nn::Tensor<float> synthesize_hazy(const nn::Tensor<float>& clear, double t,
                                  const std::array<double, 3>& atmosphere = {1.0, 1.0, 1.0});

/// t = 1 - u with u uniform on [0, 1), so t is uniform on (0, 1].
double draw_transmission(std::uint64_t seed, std::uint64_t stream);

/// per_patch hazy samples for every clear patch, white atmospheric light.
PatchDataset build_dataset(std::vector<nn::Tensor<float>> clear_patches, int per_patch,
                           std::uint64_t seed, int threads = 1);

// Dataset file (little-endian):
//   "RCDS"  u32 version  u32 patch size  u64 sample count
//   per sample: f32 clear[3*S*S]  f32 hazy[3*S*S]  f64 t  u8 bin
//   provenance: u64 seed  u64 clear patches  u32 per patch
//               u32 source count, then u32 length + bytes per source
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

std::vector<std::uint8_t> encode_dataset(const PatchDataset& dataset);
PatchDataset decode_dataset(std::vector<std::uint8_t> bytes, const std::string& source = "dataset");
void write_dataset(const std::filesystem::path& path, const PatchDataset& dataset);
PatchDataset read_dataset(const std::filesystem::path& path);

/// Hermetic stand-in for a photo corpus: gradients, checkerboards, colored
/// noise, grass- and fence-like textures under soft shading with scattered
/// dark shadow spots, some with a bright sky band.
std::vector<image::RgbImage> procedural_images(std::size_t count, int width, int height,
                                               std::uint64_t seed);

/// All PNG/PPM files in a directory, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace rankdehaze::synth
