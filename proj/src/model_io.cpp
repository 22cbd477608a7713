#include "rankdehaze/model_io.hpp"

#include <fstream>
#include <sstream>

#include "rankdehaze/binary_io.hpp"

namespace rankdehaze::nn {

namespace {

void put_params(io::ByteWriter& w, const LayerParams<float>& p) {
  w.put_array<float>(p.weights);
  w.put_array<float>(p.bias);
}

void get_params(io::ByteReader& r, LayerParams<float>& p) {
  r.get_array<float>(p.weights, "layer weights");
  r.get_array<float>(p.bias, "layer bias");
  p.reset_velocity();
}

int get_extent(io::ByteReader& r, const char* what) {
  const auto v = r.get<std::int32_t>(what);
  if (v <= 0 || v > (1 << 20)) r.fail(std::string("implausible ") + what + " " + std::to_string(v));
  return v;
}

}  // namespace

std::filesystem::path config_sidecar(const std::filesystem::path& model_path) {
  return std::filesystem::path(model_path.string() + ".config.txt");
}

std::vector<std::uint8_t> encode_network(const Network<float>& network, bool trained) {
  io::ByteWriter w;
  w.put_magic("RCNN");
  w.put<std::uint32_t>(kNetworkFormatVersion);
  w.put<std::uint32_t>(trained ? 1u : 0u);
  const Shape& in = network.input_shape();
  w.put<std::int32_t>(in.channels);
  w.put<std::int32_t>(in.height);
  w.put<std::int32_t>(in.width);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(network.depth()));
  for (const auto& layer : network.layers()) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(kind_of(layer)));
    if (const auto* conv = std::get_if<ConvLayer<float>>(&layer)) {
      w.put<std::int32_t>(conv->in_channels);
      w.put<std::int32_t>(conv->out_channels);
      w.put<std::int32_t>(conv->kernel);
      put_params(w, conv->params);
    } else if (const auto* fc = std::get_if<DenseLayer<float>>(&layer)) {
      w.put<std::int32_t>(fc->inputs);
      w.put<std::int32_t>(fc->outputs);
      put_params(w, fc->params);
    }
  }
  return w.bytes();
}

StoredNetwork decode_network(std::vector<std::uint8_t> bytes) {
  io::ByteReader r(std::move(bytes), "network");
  r.expect_magic("RCNN");
  const auto version = r.get<std::uint32_t>("format version");
  if (version != kNetworkFormatVersion) {
    r.fail("network format version " + std::to_string(version) + " not supported (expected " +
           std::to_string(kNetworkFormatVersion) + ")");
  }
  const auto flags = r.get<std::uint32_t>("flags");
  Shape in;
  in.channels = get_extent(r, "input channels");
  in.height = get_extent(r, "input height");
  in.width = get_extent(r, "input width");
  const auto count = r.get<std::uint32_t>("layer count");
  if (count > 1024) r.fail("implausible layer count " + std::to_string(count));

  std::vector<Layer<float>> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto kind = static_cast<LayerKind>(r.get<std::uint8_t>("layer kind"));
    switch (kind) {
      case LayerKind::kConv: {
        const int cin = get_extent(r, "conv in_channels");
        const int cout = get_extent(r, "conv out_channels");
        const int k = get_extent(r, "conv kernel");
        ConvLayer<float> conv(cin, cout, k);
        get_params(r, conv.params);
        layers.emplace_back(std::move(conv));
        break;
      }
      case LayerKind::kDense: {
        const int nin = get_extent(r, "dense inputs");
        const int nout = get_extent(r, "dense outputs");
        DenseLayer<float> fc(nin, nout);
        get_params(r, fc.params);
        layers.emplace_back(std::move(fc));
        break;
      }
      case LayerKind::kMaxPool: layers.emplace_back(MaxPoolLayer{}); break;
      case LayerKind::kRelu: layers.emplace_back(ReluLayer{}); break;
      case LayerKind::kRank: layers.emplace_back(RankLayer{}); break;
      default: r.fail("unknown layer kind " + std::to_string(static_cast<int>(kind)));
    }
  }
  if (!r.at_end()) r.fail("trailing bytes after last layer");
  try {
    return {Network<float>(in, std::move(layers)), (flags & 1u) != 0, std::nullopt};
  } catch (const ShapeError& e) {
    throw io::FormatError(std::string("network: inconsistent layer shapes: ") + e.what());
  }
}

void save_network(const std::filesystem::path& path, const Network<float>& network, bool trained,
                  const std::optional<TrainConfig>& config) {
  io::write_file(path, encode_network(network, trained));
  if (config) {
    std::ofstream side(config_sidecar(path), std::ios::trunc);
    if (!side) throw std::runtime_error("cannot write " + config_sidecar(path).string());
    side << config->to_text();
  }
}

StoredNetwork load_network(const std::filesystem::path& path) {
  StoredNetwork stored;
  try {
    stored = decode_network(io::read_file(path));
  } catch (const io::FormatError& e) {
    throw io::FormatError(path.string() + ": " + e.what());
  }
  const auto side = config_sidecar(path);
  if (std::filesystem::exists(side)) {
    std::ifstream in(side);
    std::stringstream text;
    text << in.rdbuf();
    stored.config = TrainConfig::from_text(text.str());
  }
  return stored;
}

}  // namespace rankdehaze::nn
