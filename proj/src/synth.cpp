#include "rankdehaze/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include "rankdehaze/binary_io.hpp"
#include "rankdehaze/parallel.hpp"
#include "rankdehaze/rng.hpp"

namespace rankdehaze::synth {

namespace {

using image::Rgb;
using image::RgbImage;

Rgb random_color(Rng& rng) {
  Rgb c;
  for (float& v : c) v = static_cast<float>(uniform01(rng));
  // Natural surfaces are rarely bright in every channel at once.
  if (uniform01(rng) < 0.6) c[uniform_index(rng, 3)] *= static_cast<float>(0.3 * uniform01(rng));
  return c;
}

Rgb mix(const Rgb& a, const Rgb& b, double w) {
  Rgb out;
  for (int c = 0; c < 3; ++c) out[c] = static_cast<float>(a[c] * (1.0 - w) + b[c] * w);
  return out;
}

void add_noise(RgbImage& img, Rng& rng, double amplitude) {
  for (float& v : img.data()) v += static_cast<float>((uniform01(rng) - 0.5) * 2.0 * amplitude);
}

void paint_gradient(RgbImage& img, Rng& rng) {
  const Rgb a = random_color(rng);
  const Rgb b = random_color(rng);
  const double angle = uniform01(rng) * 2.0 * std::numbers::pi;
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double span = std::abs(dx) * img.width() + std::abs(dy) * img.height();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double w = (x * dx + y * dy) / span;
      w = w - std::floor(w);
      img.set(x, y, mix(a, b, w));
    }
  add_noise(img, rng, 0.03);
}

void paint_checkerboard(RgbImage& img, Rng& rng) {
  const Rgb a = random_color(rng);
  const Rgb b = random_color(rng);
  const int cell = 3 + static_cast<int>(uniform_index(rng, 12));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.set(x, y, ((x / cell + y / cell) % 2) ? a : b);
  add_noise(img, rng, 0.02);
}

// Sum of random plane waves pushed through a two-color ramp.
void paint_colored_noise(RgbImage& img, Rng& rng) {
  const Rgb a = random_color(rng);
  const Rgb b = random_color(rng);
  const Rgb c = random_color(rng);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves(6);
  for (auto& w : waves) {
    w = {(uniform01(rng) - 0.5) * 0.8, (uniform01(rng) - 0.5) * 0.8,
         uniform01(rng) * 2 * std::numbers::pi, 0.5 + uniform01(rng)};
  }
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double s = 0, norm = 0;
      for (const auto& w : waves) {
        s += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
        norm += w.amp;
      }
      const double u = 0.5 + 0.5 * s / norm;
      img.set(x, y, u < 0.5 ? mix(a, b, 2 * u) : mix(b, c, 2 * u - 1));
    }
  add_noise(img, rng, 0.08);
}

void paint_grass(RgbImage& img, Rng& rng) {
  const Rgb soil{0.12f + 0.1f * float(uniform01(rng)), 0.08f + 0.08f * float(uniform01(rng)), 0.03f};
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.set(x, y, soil);
  const int blades = img.width() * img.height() / 12;
  for (int i = 0; i < blades; ++i) {
    const int x0 = static_cast<int>(uniform_index(rng, img.width()));
    const int y0 = static_cast<int>(uniform_index(rng, img.height()));
    const int len = 4 + static_cast<int>(uniform_index(rng, 10));
    const double lean = (uniform01(rng) - 0.5) * 0.6;
    const Rgb g{static_cast<float>(0.05 + 0.25 * uniform01(rng)),
                static_cast<float>(0.25 + 0.55 * uniform01(rng)),
                static_cast<float>(0.02 + 0.15 * uniform01(rng))};
    for (int k = 0; k < len; ++k) {
      const int x = x0 + static_cast<int>(std::lround(lean * k));
      const int y = y0 - k;
      if (x >= 0 && x < img.width() && y >= 0 && y < img.height()) img.set(x, y, g);
    }
  }
  add_noise(img, rng, 0.03);
}

void paint_fence(RgbImage& img, Rng& rng) {
  const Rgb back = random_color(rng);
  const Rgb post = mix(Rgb{0.95f, 0.93f, 0.88f}, random_color(rng), 0.3 * uniform01(rng));
  const Rgb shadow{0.05f, 0.05f, 0.06f};
  const int period = 6 + static_cast<int>(uniform_index(rng, 10));
  const int width = 2 + static_cast<int>(uniform_index(rng, period / 2));
  const int rail = img.height() / 3;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const int m = x % period;
      Rgb v = back;
      if (m < width) v = post;
      else if (m == width) v = shadow;
      if (std::abs(y - rail) < 2 || std::abs(y - 2 * rail) < 2) v = post;
      img.set(x, y, v);
    }
  add_noise(img, rng, 0.03);
}

void paint_blobs(RgbImage& img, Rng& rng) {
  const Rgb back = random_color(rng);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.set(x, y, back);
  const int n = 5 + static_cast<int>(uniform_index(rng, 20));
  for (int i = 0; i < n; ++i) {
    const Rgb c = random_color(rng);
    const double cx = uniform01(rng) * img.width();
    const double cy = uniform01(rng) * img.height();
    const double r = 2.0 + uniform01(rng) * img.width() / 5.0;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img.set(x, y, c);
      }
  }
  add_noise(img, rng, 0.04);
}

// Outdoor photos nearly always hold shadows and dark crevices within any
// small window; flat bright textures without them are ambiguous under haze.
void add_shadows(RgbImage& img, Rng& rng) {
  const double fx = (0.5 + uniform01(rng)) * 2 * std::numbers::pi / img.width();
  const double fy = (0.5 + uniform01(rng)) * 2 * std::numbers::pi / img.height();
  const double px = uniform01(rng) * 6.3, py = uniform01(rng) * 6.3;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const float shade = static_cast<float>(0.75 + 0.25 * std::sin(fx * x + px) * std::cos(fy * y + py));
      for (int c = 0; c < 3; ++c) img.at(x, y, c) *= shade;
    }
  constexpr int cell = 12;
  for (int cy = 0; cy < img.height(); cy += cell)
    for (int cx = 0; cx < img.width(); cx += cell) {
      if (uniform01(rng) < 0.2) continue;
      const int x0 = cx + static_cast<int>(uniform_index(rng, cell));
      const int y0 = cy + static_cast<int>(uniform_index(rng, cell));
      const int r = 1 + static_cast<int>(uniform_index(rng, 2));
      const float depth = static_cast<float>(0.02 + 0.08 * uniform01(rng));
      for (int y = y0 - r; y <= y0 + r; ++y)
        for (int x = x0 - r; x <= x0 + r; ++x) {
          if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) continue;
          if ((x - x0) * (x - x0) + (y - y0) * (y - y0) > r * r) continue;
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = depth * (0.5f + img.at(x, y, c));
        }
    }
}

void paint_sky(RgbImage& img, Rng& rng) {
  const int band = img.height() / 5 + static_cast<int>(uniform_index(rng, img.height() / 4 + 1));
  const Rgb top{0.88f, 0.93f, 1.0f};
  for (int y = 0; y < band; ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double w = static_cast<double>(y) / std::max(1, band);
      img.set(x, y, mix(top, Rgb{0.97f, 0.98f, 1.0f}, w));
    }
}

}  // namespace

std::array<std::size_t, net::kNumBins> PatchDataset::bin_histogram() const {
  std::array<std::size_t, net::kNumBins> h{};
  for (const auto& s : samples) ++h[s.label.index()];
  return h;
}

std::vector<nn::Tensor<float>> sample_clear_patches(std::span<const image::RgbImage> images,
                                                    std::size_t count, std::uint64_t seed,
                                                    int size) {
  if (count == 0) throw std::invalid_argument("sample_clear_patches: count must be >= 1");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width() >= size && images[i].height() >= size) {
      usable.push_back(i);
    } else {
      std::cerr << "warning: skipping image " << i << " (" << images[i].width() << "x"
                << images[i].height() << ") smaller than " << size << "x" << size << " patch\n";
    }
  }
  if (usable.empty()) throw std::invalid_argument("sample_clear_patches: no image is large enough");
  std::vector<nn::Tensor<float>> patches;
  patches.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    const auto& img = images[usable[uniform_index(rng, usable.size())]];
    const int x0 = static_cast<int>(uniform_index(rng, img.width() - size + 1));
    const int y0 = static_cast<int>(uniform_index(rng, img.height() - size + 1));
    auto patch = image::extract_patch(img, x0, y0, size);
    for (float& v : patch.values()) v = std::clamp(v, 0.0f, 1.0f);
    patches.push_back(std::move(patch));
  }
  return patches;
}

nn::Tensor<float> synthesize_hazy(const nn::Tensor<float>& clear, double t,
                                  const std::array<double, 3>& atmosphere) {
  if (!(t > 0.0 && t <= 1.0)) {
    throw std::invalid_argument("synthesize_hazy: transmission " + std::to_string(t) +
                                " outside (0, 1]");
  }
  nn::Tensor<float> hazy(clear.shape());
  for (int c = 0; c < clear.shape().channels; ++c) {
    const auto src = clear.channel(c);
    auto dst = hazy.channel(c);
    const double a = atmosphere[c % 3];
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<float>(static_cast<double>(src[i]) * t + a * (1.0 - t));
    }
  }
  return hazy;
}

double draw_transmission(std::uint64_t seed, std::uint64_t stream) {
  Rng rng(derive_seed(seed, stream));
  return 1.0 - uniform01(rng);
}

PatchDataset build_dataset(std::vector<nn::Tensor<float>> clear_patches, int per_patch,
                           std::uint64_t seed, int threads) {
  if (per_patch < 1) throw std::invalid_argument("build_dataset: per_patch must be >= 1");
  PatchDataset ds;
  ds.provenance.seed = seed;
  ds.provenance.clear_patches = clear_patches.size();
  ds.provenance.per_patch = static_cast<std::uint32_t>(per_patch);
  ds.samples.resize(clear_patches.size() * per_patch);
  const std::uint64_t t_seed = derive_seed(seed, 0x7472616e73ULL);
  parallel_for(ds.samples.size(), threads, [&](std::size_t i) {
    const auto& clear = clear_patches[i / per_patch];
    const double t = draw_transmission(t_seed, i);
    ds.samples[i] = PatchSample{clear, synthesize_hazy(clear, t), t, net::bin_label(t)};
  });
  return ds;
}

std::vector<std::uint8_t> encode_dataset(const PatchDataset& dataset) {
  io::ByteWriter w;
  w.put_magic("RCDS");
  w.put<std::uint32_t>(kDatasetFormatVersion);
  const int size = dataset.samples.empty() ? kPatchSize : dataset.samples.front().clear.shape().height;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(size));
  w.put<std::uint64_t>(dataset.samples.size());
  const nn::Shape expected{3, size, size};
  for (const auto& s : dataset.samples) {
    nn::require_shape(s.clear.shape(), expected, "dataset clear patch");
    nn::require_shape(s.hazy.shape(), expected, "dataset hazy patch");
    w.put_array<float>(s.clear.values());
    w.put_array<float>(s.hazy.values());
    w.put<double>(s.transmission);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.label.bin));
  }
  const auto& p = dataset.provenance;
  w.put<std::uint64_t>(p.seed);
  w.put<std::uint64_t>(p.clear_patches);
  w.put<std::uint32_t>(p.per_patch);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.sources.size()));
  for (const auto& src : p.sources) w.put_string(src);
  return w.bytes();
}

PatchDataset decode_dataset(std::vector<std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic("RCDS");
  const auto version = r.get<std::uint32_t>("format version");
  if (version != kDatasetFormatVersion) {
    r.fail("dataset format version " + std::to_string(version) +
           " is not supported by this build (expects version " +
           std::to_string(kDatasetFormatVersion) + ")");
  }
  const auto size = r.get<std::uint32_t>("patch size");
  if (size == 0 || size > 1024) r.fail("implausible patch size " + std::to_string(size));
  const auto count = r.get<std::uint64_t>("sample count");
  const nn::Shape shape{3, static_cast<int>(size), static_cast<int>(size)};
  const std::size_t record = shape.size() * 2 * sizeof(float) + sizeof(double) + 1;
  if (count > r.remaining() / record) {
    r.fail("sample count " + std::to_string(count) + " exceeds file size (truncated?)");
  }
  PatchDataset ds;
  ds.samples.resize(count);
  for (auto& s : ds.samples) {
    s.clear = nn::Tensor<float>(shape);
    s.hazy = nn::Tensor<float>(shape);
    r.get_array<float>(s.clear.values(), "clear patch");
    r.get_array<float>(s.hazy.values(), "hazy patch");
    s.transmission = r.get<double>("transmission");
    const int bin = r.get<std::uint8_t>("bin label");
    if (!(s.transmission > 0.0 && s.transmission <= 1.0) || bin < 1 || bin > net::kNumBins) {
      r.fail("invalid transmission/label record");
    }
    s.label = {bin};
  }
  auto& p = ds.provenance;
  p.seed = r.get<std::uint64_t>("provenance seed");
  p.clear_patches = r.get<std::uint64_t>("provenance patch count");
  p.per_patch = r.get<std::uint32_t>("provenance per-patch count");
  const auto sources = r.get<std::uint32_t>("provenance source count");
  for (std::uint32_t i = 0; i < sources; ++i) p.sources.push_back(r.get_string("provenance source"));
  if (!r.at_end()) r.fail("trailing bytes after provenance block");
  return ds;
}

void write_dataset(const std::filesystem::path& path, const PatchDataset& dataset) {
  io::write_file(path, encode_dataset(dataset));
}

PatchDataset read_dataset(const std::filesystem::path& path) {
  return decode_dataset(io::read_file(path), path.string());
}

std::vector<image::RgbImage> procedural_images(std::size_t count, int width, int height,
                                               std::uint64_t seed) {
  std::vector<image::RgbImage> images;
  images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    RgbImage img(width, height);
    switch (i % 6) {
      case 0: paint_gradient(img, rng); break;
      case 1: paint_checkerboard(img, rng); break;
      case 2: paint_colored_noise(img, rng); break;
      case 3: paint_grass(img, rng); break;
      case 4: paint_fence(img, rng); break;
      default: paint_blobs(img, rng); break;
    }
    add_shadows(img, rng);
    if (uniform01(rng) < 0.3) paint_sky(img, rng);
    img.clamp01();
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && image::is_image_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rankdehaze::synth
