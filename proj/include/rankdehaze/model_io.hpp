#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "rankdehaze/network.hpp"
#include "rankdehaze/optim.hpp"

namespace rankdehaze::nn {

// Little-endian network file:
//   "RCNN"  u32 version  u32 flags (bit 0: trained)
//   i32 input channels, height, width
//   u32 layer count, then per layer:
//     u8 kind (LayerKind)
//     conv:  i32 in_channels, out_channels, kernel; f32 weights[]; f32 bias[]
//     dense: i32 inputs, outputs;                   f32 weights[]; f32 bias[]
//     maxpool / relu / rank: no payload
// Momentum buffers are not stored. The TrainConfig used for training goes
// to a "<path>.config.txt" sidecar.
inline constexpr std::uint32_t kNetworkFormatVersion = 1;

struct StoredNetwork {
  Network<float> network;
  bool trained = false;
  std::optional<TrainConfig> config;
};

std::vector<std::uint8_t> encode_network(const Network<float>& network, bool trained);
StoredNetwork decode_network(std::vector<std::uint8_t> bytes);

void save_network(const std::filesystem::path& path, const Network<float>& network, bool trained,
                  const std::optional<TrainConfig>& config);
StoredNetwork load_network(const std::filesystem::path& path);

std::filesystem::path config_sidecar(const std::filesystem::path& model_path);

}  // namespace rankdehaze::nn
