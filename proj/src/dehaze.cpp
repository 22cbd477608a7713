#include "rankdehaze/dehaze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

#include "rankdehaze/parallel.hpp"

namespace rankdehaze::dehaze {

namespace {

using Grid = std::vector<double>;

void require_same(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(what) + ": image dimensions differ");
}

// Sliding minimum over a clipped window along one axis.
void min_filter_1d(const float* in, float* out, int n, std::ptrdiff_t step, int half) {
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    float m = in[lo * step];
    for (int k = lo + 1; k <= hi; ++k) m = std::min(m, in[k * step]);
    out[i * step] = m;
  }
}

Grid box_mean_d(const Grid& p, int w, int h, int r) {
  // Integral image with a zero border row/column.
  Grid s(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0;
    for (int x = 0; x < w; ++x) {
      row += p[static_cast<std::size_t>(y) * w + x];
      s[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] = s[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
    }
  }
  Grid out(p.size());
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      const auto at = [&](int yy, int xx) { return s[static_cast<std::size_t>(yy) * (w + 1) + xx]; };
      const double sum = at(y1 + 1, x1 + 1) - at(y0, x1 + 1) - at(y1 + 1, x0) + at(y0, x0);
      out[static_cast<std::size_t>(y) * w + x] = sum / static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
    }
  }
  return out;
}

template <typename F>
auto run_stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw DehazeError(std::string("dehaze stage '") + name + "' failed: " + e.what());
  }
}

}  // namespace

Plane dark_channel(const RgbImage& image, int window) {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("dark_channel: window must be odd and >= 1");
  const int w = image.width(), h = image.height();
  Plane m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(x, y) = std::min({image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2)});
  Plane rows(w, h), out(w, h);
  const int half = window / 2;
  for (int y = 0; y < h; ++y) min_filter_1d(&m.at(0, y), &rows.at(0, y), w, 1, half);
  for (int x = 0; x < w; ++x) min_filter_1d(&rows.at(x, 0), &out.at(x, 0), h, w, half);
  return out;
}

Atmosphere estimate_atmospheric_light(const RgbImage& image, int window) {
  if (image.empty()) throw std::invalid_argument("estimate_atmospheric_light: empty image");
  const Plane dark = dark_channel(image, window);
  const std::size_t n = image.pixels();
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.001 * static_cast<double>(n))));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const auto& d = dark.data();
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] > d[b] || (d[a] == d[b] && a < b); });
  Atmosphere a{0, 0, 0};
  for (std::size_t k = 0; k < count; ++k)
    for (int c = 0; c < 3; ++c) a[c] += image.data()[idx[k] * 3 + c];
  for (double& v : a) v = std::clamp(v / static_cast<double>(count), kAtmosphereFloor, 1.0);
  return a;
}

RgbImage white_balance(const RgbImage& image, const Atmosphere& a) {
  for (double v : a) {
    if (!(v > 0)) throw std::invalid_argument("white_balance: atmospheric light must be positive");
  }
  RgbImage out = image;
  auto& data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(data[i] / a[i % 3]);
  return out;
}

TransmissionMap transmission_map(const RgbImage& balanced, const net::RankingCnn& model, const rf::Forest& forest,
                                 const TransmissionOptions& options) {
  if (!model.trained()) throw std::invalid_argument("transmission_map: Ranking-CNN model is not trained");
  if (forest.trees().empty()) throw std::invalid_argument("transmission_map: forest has no trees");
  if (model.feature_dim(options.feature_layer) != forest.dim()) {
    throw std::invalid_argument("transmission_map: forest expects " + std::to_string(forest.dim()) +
                                "-D features, network layer gives " +
                                std::to_string(model.feature_dim(options.feature_layer)));
  }
  if (options.stride < 1) throw std::invalid_argument("transmission_map: stride must be >= 1");
  const int w = balanced.width(), h = balanced.height(), s = options.stride;
  const int gw = (w + s - 1) / s, gh = (h + s - 1) / s;
  const int half = synth::kPatchSize / 2;
  std::vector<float> grid(static_cast<std::size_t>(gw) * gh);
  parallel_for(grid.size(), options.threads, [&](std::size_t i) {
    const int gx = static_cast<int>(i % gw), gy = static_cast<int>(i / gw);
    const auto patch = image::extract_patch(balanced, gx * s - half, gy * s - half, synth::kPatchSize);
    const auto f = model.features(patch, options.feature_layer);
    grid[i] = static_cast<float>(forest.predict(f));
  });
  TransmissionMap t(w, h);
  for (int y = 0; y < h; ++y) {
    const int gy = std::min(gh - 1, (y + s / 2) / s);
    for (int x = 0; x < w; ++x) {
      const int gx = std::min(gw - 1, (x + s / 2) / s);
      t.at(x, y) = std::clamp(grid[static_cast<std::size_t>(gy) * gw + gx], kTransmissionFloor, 1.0f);
    }
  }
  return t;
}

Plane box_mean(const Plane& p, int radius) {
  const Grid g(p.data().begin(), p.data().end());
  const Grid m = box_mean_d(g, p.width(), p.height(), radius);
  Plane out(p.width(), p.height());
  std::transform(m.begin(), m.end(), out.data().begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

Plane guided_filter_raw(const Plane& guide, const Plane& target, int radius, double eps) {
  require_same(image::same_size(guide, target), "guided_filter");
  if (radius < 0) throw std::invalid_argument("guided_filter: radius must be >= 0");
  if (!(eps > 0)) throw std::invalid_argument("guided_filter: eps must be positive");
  const int w = guide.width(), h = guide.height();
  const std::size_t n = guide.pixels();
  Grid I(guide.data().begin(), guide.data().end()), p(target.data().begin(), target.data().end());
  Grid Ip(n), II(n);
  for (std::size_t i = 0; i < n; ++i) {
    Ip[i] = I[i] * p[i];
    II[i] = I[i] * I[i];
  }
  const Grid mI = box_mean_d(I, w, h, radius), mp = box_mean_d(p, w, h, radius);
  const Grid mIp = box_mean_d(Ip, w, h, radius), mII = box_mean_d(II, w, h, radius);
  Grid a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double var = mII[i] - mI[i] * mI[i];
    const double cov = mIp[i] - mI[i] * mp[i];
    a[i] = cov / (var + eps);
    b[i] = mp[i] - a[i] * mI[i];
  }
  const Grid ma = box_mean_d(a, w, h, radius), mb = box_mean_d(b, w, h, radius);
  Plane q(w, h);
  for (std::size_t i = 0; i < n; ++i) q.data()[i] = static_cast<float>(ma[i] * I[i] + mb[i]);
  return q;
}

Plane guided_filter(const Plane& guide, const Plane& target, int radius, double eps) {
  Plane q = guided_filter_raw(guide, target, radius, eps);
  for (float& v : q.data()) v = std::isfinite(v) ? std::clamp(v, kTransmissionFloor, 1.0f) : 1.0f;
  return q;
}

RgbImage recover_unclamped(const RgbImage& image, const Atmosphere& a, const TransmissionMap& t) {
  require_same(image::same_size(image, t), "recover");
  RgbImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const double tt = std::max(static_cast<double>(t.at(x, y)), kRecoveryFloor);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>((image.at(x, y, c) - a[c]) / tt + a[c]);
    }
  return out;
}

RgbImage recover(const RgbImage& image, const Atmosphere& a, const TransmissionMap& t) {
  RgbImage out = recover_unclamped(image, a, t);
  out.clamp01();
  return out;
}

double exposure_factor(const RgbImage& recovered, const RgbImage& hazy, bool* capped) {
  require_same(image::same_size(recovered, hazy), "exposure_adjust");
  const auto sum_luma = [](const RgbImage& img) {
    double s = 0;
    for (std::size_t i = 0; i < img.pixels(); ++i) {
      const float* px = img.data().data() + i * 3;
      s += 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
    return s;
  };
  const double si = sum_luma(hazy), sj = sum_luma(recovered);
  if (capped) *capped = false;
  if (!(sj > 0)) {
    std::cerr << "warning: recovered image is black; exposure factor capped at " << kMaxExposure << "\n";
    if (capped) *capped = true;
    return kMaxExposure;
  }
  const double lambda = std::log(si / sj) + 1.0;
  if (lambda > kMaxExposure) {
    if (capped) *capped = true;
    return kMaxExposure;
  }
  return std::max(1.0, lambda);
}

Exposure exposure_adjust(const RgbImage& recovered, const RgbImage& hazy) {
  Exposure e;
  e.lambda = exposure_factor(recovered, hazy, &e.capped);
  e.image = recovered;
  for (float& v : e.image.data()) v = static_cast<float>(v * e.lambda);
  e.image.clamp01();
  return e;
}

DehazeResult dehaze(const RgbImage& hazy, const net::RankingCnn& model, const rf::Forest& forest,
                    const DehazeOptions& options) {
  if (hazy.empty()) throw DehazeError("dehaze: input image is empty");
  DehazeResult r;
  r.atmosphere = run_stage("atmospheric light", [&] { return estimate_atmospheric_light(hazy, options.dark_window); });
  const RgbImage balanced = run_stage("white balance", [&] { return white_balance(hazy, r.atmosphere); });
  r.raw_transmission = run_stage("transmission map", [&] {
    return transmission_map(balanced, model, forest, options.transmission);
  });
  r.transmission = run_stage("guided filter", [&] {
    return guided_filter(image::luminance(hazy), r.raw_transmission, options.guided_radius, options.guided_eps);
  });
  r.recovered = run_stage("recovery", [&] { return recover(hazy, r.atmosphere, r.transmission); });
  if (options.adjust_exposure) {
    auto e = run_stage("exposure", [&] { return exposure_adjust(r.recovered, hazy); });
    r.output = std::move(e.image);
    r.lambda = e.lambda;
  } else {
    r.output = r.recovered;
  }
  return r;
}

void write_atmosphere(const std::filesystem::path& path, const Atmosphere& a) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(9) << "A = " << a[0] << " " << a[1] << " " << a[2] << "\n";
}

}  // namespace rankdehaze::dehaze
