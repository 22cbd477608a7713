#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rankdehaze/dehaze.hpp"
#include "rankdehaze/eval.hpp"

using namespace rankdehaze;
using dehaze::Atmosphere;
using image::Plane;
using image::RgbImage;

namespace {

RgbImage random_image(int w, int h, std::uint64_t seed, float lo = 0.f, float hi = 1.f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  RgbImage img(w, h);
  for (float& v : img.data()) v = u(rng);
  return img;
}

Plane random_plane(int w, int h, std::uint64_t seed, float lo = 0.f, float hi = 1.f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Plane p(w, h);
  for (float& v : p.data()) v = u(rng);
  return p;
}

// Straight per-window guided filter, no integral images.
Plane naive_guided(const Plane& I, const Plane& p, int r, double eps) {
  const int w = I.width(), h = I.height();
  std::vector<double> a(I.pixels()), b(I.pixels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double si = 0, sp = 0, sip = 0, sii = 0;
      int n = 0;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
          const double iv = I.at(xx, yy), pv = p.at(xx, yy);
          si += iv;
          sp += pv;
          sip += iv * pv;
          sii += iv * iv;
          ++n;
        }
      const double mi = si / n, mp = sp / n;
      const double ak = (sip / n - mi * mp) / (sii / n - mi * mi + eps);
      a[static_cast<std::size_t>(y) * w + x] = ak;
      b[static_cast<std::size_t>(y) * w + x] = mp - ak * mi;
    }
  Plane q(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sa = 0, sb = 0;
      int n = 0;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
          sa += a[static_cast<std::size_t>(yy) * w + xx];
          sb += b[static_cast<std::size_t>(yy) * w + xx];
          ++n;
        }
      q.at(x, y) = static_cast<float>(sa / n * I.at(x, y) + sb / n);
    }
  return q;
}

// Untrained weights marked trained, plus a small forest over random
// features; enough to exercise the plumbing.
struct Models {
  net::RankingCnn model;
  rf::Forest forest;
};

Models stub_models() {
  Models m;
  m.model = net::RankingCnn::build(net::kDefaultPlacement, 3);
  m.model.set_trained(true);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  rf::FeatureMatrix x(300, 64);
  for (float& v : x.data) v = u(rng);
  std::vector<double> y(300);
  for (std::size_t i = 0; i < 300; ++i) y[i] = 0.05 + 0.9 * x.at(i, 0);
  rf::ForestConfig cfg;
  cfg.n_trees = 8;
  m.forest = rf::fit_forest(x, y, cfg);
  return m;
}

}  // namespace

TEST_SUITE("dark channel") {
  TEST_CASE("constant gray gives a constant map") {
    const RgbImage img(9, 7, {0.4f, 0.4f, 0.4f});
    const auto out = dehaze::dark_channel(img, 15);
    for (float v : out.data()) CHECK(v == 0.4f);
  }

  TEST_CASE("white image gives ones") {
    const RgbImage img(5, 5, {1.f, 1.f, 1.f});
    const auto out = dehaze::dark_channel(img);
    for (float v : out.data()) CHECK(v == 1.f);
  }

  TEST_CASE("matches brute force on random 8x8 with window 3") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto img = random_image(8, 8, seed);
      const auto d = dehaze::dark_channel(img, 3);
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          float m = 2.f;
          for (int yy = std::max(0, y - 1); yy <= std::min(7, y + 1); ++yy)
            for (int xx = std::max(0, x - 1); xx <= std::min(7, x + 1); ++xx)
              for (int c = 0; c < 3; ++c) m = std::min(m, img.at(xx, yy, c));
          CHECK(d.at(x, y) == m);
        }
    }
  }

  TEST_CASE("non-square images and window larger than the image") {
    const auto img = random_image(5, 3, 4);
    const auto d = dehaze::dark_channel(img, 15);
    const float m = *std::min_element(img.data().begin(), img.data().end());
    for (float v : d.data()) CHECK(v == m);
  }

  TEST_CASE("even or zero window is rejected") {
    const RgbImage img(4, 4);
    CHECK_THROWS_AS((void)dehaze::dark_channel(img, 4), std::invalid_argument);
    CHECK_THROWS_AS((void)dehaze::dark_channel(img, 0), std::invalid_argument);
  }
}

TEST_SUITE("atmospheric light") {
  TEST_CASE("constant image gives its colour") {
    const RgbImage img(30, 20, {0.2f, 0.5f, 0.7f});
    const auto a = dehaze::estimate_atmospheric_light(img);
    CHECK(a[0] == doctest::Approx(0.2));
    CHECK(a[1] == doctest::Approx(0.5));
    CHECK(a[2] == doctest::Approx(0.7));
  }

  TEST_CASE("single white pixel in a small black image") {
    // 30x30 = 900 pixels, so one pixel is selected. With window 1 its dark
    // channel is the unique maximum.
    RgbImage img(30, 30);
    img.set(11, 17, {1.f, 1.f, 1.f});
    const auto a = dehaze::estimate_atmospheric_light(img, 1);
    for (double v : a) CHECK(v == 1.0);
  }

  TEST_CASE("ties go to the lowest index") {
    // 1200 pixels select 2: the coloured corner, then the first of the
    // tied black pixels.
    RgbImage flat(40, 30);
    flat.set(0, 0, {0.3f, 0.6f, 0.9f});
    const auto b = dehaze::estimate_atmospheric_light(flat, 1);
    CHECK(b[0] == doctest::Approx(0.15));
    CHECK(b[1] == doctest::Approx(0.3));
    CHECK(b[2] == doctest::Approx(0.45));
  }

  TEST_CASE("channels stay in (0, 1]") {
    const RgbImage black(10, 10);
    for (double v : dehaze::estimate_atmospheric_light(black)) {
      CHECK(v > 0);
      CHECK(v == dehaze::kAtmosphereFloor);
    }
    for (std::uint64_t s = 0; s < 5; ++s) {
      for (double v : dehaze::estimate_atmospheric_light(random_image(40, 25, s))) {
        CHECK(v > 0);
        CHECK(v <= 1);
      }
    }
  }

  TEST_CASE("empty image rejected") {
    CHECK_THROWS_AS((void)dehaze::estimate_atmospheric_light(RgbImage{}), std::invalid_argument);
  }
}

TEST_SUITE("white balance") {
  TEST_CASE("unit light is the identity") {
    const auto img = random_image(6, 6, 1);
    CHECK(dehaze::white_balance(img, {1, 1, 1}) == img);
  }

  TEST_CASE("I = A gives ones") {
    const Atmosphere a{0.7, 0.8, 0.9};
    RgbImage img(4, 4, {0.7f, 0.8f, 0.9f});
    const auto out = dehaze::white_balance(img, a);
    for (float v : out.data()) CHECK(v == doctest::Approx(1.f).epsilon(1e-6));
  }

  TEST_CASE("balanced synthesis equals unit-light synthesis") {
    const auto clear = random_image(12, 10, 2);
    const auto t = random_plane(12, 10, 3, 0.05f, 1.f);
    const Atmosphere a{0.8, 0.85, 0.95};
    const auto hazy = eval::synthesize(clear, t, a);
    // Unit-light synthesis of J/A at the same t.
    RgbImage scaled = clear;
    for (std::size_t i = 0; i < scaled.data().size(); ++i) scaled.data()[i] = float(clear.data()[i] / a[i % 3]);
    const auto expected = eval::synthesize(scaled, t);
    const auto balanced = dehaze::white_balance(hazy, a);
    for (std::size_t i = 0; i < expected.data().size(); ++i) {
      CHECK(std::abs(balanced.data()[i] - expected.data()[i]) <= 1e-6 * std::max(1.f, expected.data()[i]));
    }
  }

  TEST_CASE("non-positive light rejected") {
    CHECK_THROWS_AS((void)dehaze::white_balance(RgbImage(2, 2), {0, 1, 1}), std::invalid_argument);
  }
}

TEST_SUITE("guided filter") {
  TEST_CASE("constant target stays constant") {
    const auto guide = random_plane(20, 15, 1);
    const Plane target(20, 15, 0.37f);
    const auto out = dehaze::guided_filter(guide, target, 4, 1e-3);
    for (float v : out.data()) CHECK(v == doctest::Approx(0.37f).epsilon(1e-5));
  }

  TEST_CASE("large eps approaches the box blur") {
    const auto guide = random_plane(16, 16, 2);
    const auto target = random_plane(16, 16, 3);
    const auto q = dehaze::guided_filter_raw(guide, target, 2, 1e9);
    // With a -> 0 the output is the box mean of the box means.
    const auto expected = dehaze::box_mean(dehaze::box_mean(target, 2), 2);
    for (std::size_t i = 0; i < q.pixels(); ++i) CHECK(q.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-6));
  }

  TEST_CASE("matches the per-window reference on random 16x16") {
    for (std::uint64_t s = 0; s < 4; ++s) {
      const auto guide = random_plane(16, 16, 10 + s);
      const auto target = random_plane(16, 16, 20 + s, 0.05f, 1.f);
      for (int r : {1, 3, 20}) {
        const auto fast = dehaze::guided_filter_raw(guide, target, r, 1e-3);
        const auto slow = naive_guided(guide, target, r, 1e-3);
        for (std::size_t i = 0; i < fast.pixels(); ++i) CHECK(std::abs(fast.data()[i] - slow.data()[i]) <= 1e-6);
      }
    }
  }

  TEST_CASE("idempotent when the target is affine in the guide") {
    const auto guide = random_plane(24, 18, 4, 0.2f, 0.8f);
    Plane target(24, 18);
    for (std::size_t i = 0; i < target.pixels(); ++i) target.data()[i] = 0.1f + 0.8f * guide.data()[i];
    const auto once = dehaze::guided_filter(guide, target, 3, 1e-6);
    const auto twice = dehaze::guided_filter(guide, once, 3, 1e-6);
    for (std::size_t i = 0; i < once.pixels(); ++i) CHECK(std::abs(once.data()[i] - twice.data()[i]) <= 1e-4);
  }

  TEST_CASE("output clamped into the transmission range") {
    const auto guide = random_plane(16, 16, 5);
    const auto target = random_plane(16, 16, 6, -0.5f, 1.5f);
    const auto out = dehaze::guided_filter(guide, target, 2, 1e-4);
    for (float v : out.data()) {
      CHECK(v >= dehaze::kTransmissionFloor);
      CHECK(v <= 1.f);
    }
  }

  TEST_CASE("size mismatch and bad parameters rejected") {
    CHECK_THROWS_AS((void)dehaze::guided_filter(Plane(3, 3), Plane(3, 4)), std::invalid_argument);
    CHECK_THROWS_AS((void)dehaze::guided_filter(Plane(3, 3), Plane(3, 3), -1, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS((void)dehaze::guided_filter(Plane(3, 3), Plane(3, 3), 1, 0), std::invalid_argument);
  }
}

TEST_SUITE("recovery") {
  TEST_CASE("pixels equal to A are fixed for any t") {
    const Atmosphere a{0.6, 0.7, 0.8};
    const RgbImage img(7, 5, {0.6f, 0.7f, 0.8f});
    const auto t = random_plane(7, 5, 1, 0.f, 1.f);
    const auto j = dehaze::recover_unclamped(img, a, t);
    for (std::size_t i = 0; i < j.data().size(); ++i) CHECK(std::abs(j.data()[i] - float(a[i % 3])) <= 1e-6);
  }

  TEST_CASE("t = 1 is the identity") {
    const auto img = random_image(6, 6, 2);
    CHECK(dehaze::recover(img, {0.9, 0.9, 0.9}, Plane(6, 6, 1.f)) == img);
  }

  TEST_CASE("inverts synthesis with the true A and t") {
    const auto clear = random_image(20, 14, 3);
    const auto t = random_plane(20, 14, 4, 0.05f, 1.f);
    const Atmosphere a{0.85, 0.9, 1.0};
    const auto j = dehaze::recover_unclamped(eval::synthesize(clear, t, a), a, t);
    double worst = 0;
    for (std::size_t i = 0; i < j.data().size(); ++i) worst = std::max(worst, double(std::abs(j.data()[i] - clear.data()[i])));
    // Float storage of I limits this: the error scales with 1/t.
    CHECK(worst <= 1e-6 / 0.05 * 1.2);
    // In double, end to end, the identity is tight.
    double worst_d = 0;
    for (int y = 0; y < 14; ++y)
      for (int x = 0; x < 20; ++x)
        for (int c = 0; c < 3; ++c) {
          const double tt = t.at(x, y);
          const double i = clear.at(x, y, c) * tt + a[c] * (1 - tt);
          worst_d = std::max(worst_d, std::abs((i - a[c]) / tt + a[c] - clear.at(x, y, c)));
        }
    CHECK(worst_d <= 1e-6);
  }

  TEST_CASE("recover clamps and floors t at 0.05") {
    RgbImage img(1, 1, {0.2f, 0.5f, 0.9f});
    const auto j = dehaze::recover_unclamped(img, {1, 1, 1}, Plane(1, 1, 0.001f));
    CHECK(j.at(0, 0, 0) == doctest::Approx((0.2 - 1) / 0.05 + 1));
    const auto c = dehaze::recover(img, {1, 1, 1}, Plane(1, 1, 0.001f));
    CHECK(c.at(0, 0, 0) == 0.f);
  }
}

TEST_SUITE("exposure") {
  TEST_CASE("equal luminance gives lambda 1") {
    const auto img = random_image(10, 10, 1);
    const auto e = dehaze::exposure_adjust(img, img);
    CHECK(e.lambda == 1.0);
    CHECK(e.image == img);
  }

  TEST_CASE("luminance ratio e gives lambda 2") {
    const RgbImage j(8, 8, {0.1f, 0.1f, 0.1f});
    RgbImage i(8, 8);
    const double v = 0.1 * std::exp(1.0);
    for (float& x : i.data()) x = static_cast<float>(v);
    CHECK(dehaze::exposure_factor(j, i) == doctest::Approx(2.0).epsilon(1e-6));
    const auto e = dehaze::exposure_adjust(j, i);
    CHECK(e.image.at(0, 0, 0) == doctest::Approx(0.2f).epsilon(1e-5));
  }

  TEST_CASE("lambda never below 1 and output never darker") {
    for (std::uint64_t s = 0; s < 6; ++s) {
      const auto j = random_image(10, 10, s);
      const auto i = random_image(10, 10, s + 100, 0.f, 0.5f);
      const auto e = dehaze::exposure_adjust(j, i);
      CHECK(e.lambda >= 1.0);
      const auto lj = image::luminance(j), le = image::luminance(e.image);
      for (std::size_t k = 0; k < lj.pixels(); ++k) CHECK(le.data()[k] >= lj.data()[k] - 1e-6f);
    }
  }

  TEST_CASE("black recovery is capped") {
    const RgbImage j(4, 4);
    const RgbImage i(4, 4, {0.5f, 0.5f, 0.5f});
    const auto e = dehaze::exposure_adjust(j, i);
    CHECK(e.lambda == dehaze::kMaxExposure);
    CHECK(e.capped);
  }
}

TEST_SUITE("transmission map") {
  TEST_CASE("uniform image gives a uniform map in range") {
    const auto m = stub_models();
    const RgbImage img(24, 20, {0.4f, 0.5f, 0.6f});
    const auto t = dehaze::transmission_map(img, m.model, m.forest);
    REQUIRE(t.width() == 24);
    REQUIRE(t.height() == 20);
    for (float v : t.data()) {
      CHECK(v == t.data()[0]);
      CHECK(v > 0.f);
      CHECK(v <= 1.f);
    }
  }

  TEST_CASE("stride fills from the nearest computed pixel and threads do not matter") {
    const auto m = stub_models();
    const auto img = random_image(23, 17, 8);
    dehaze::TransmissionOptions full;
    const auto t1 = dehaze::transmission_map(img, m.model, m.forest, full);
    full.threads = 3;
    CHECK(dehaze::transmission_map(img, m.model, m.forest, full) == t1);
    dehaze::TransmissionOptions strided;
    strided.stride = 4;
    const auto t4 = dehaze::transmission_map(img, m.model, m.forest, strided);
    for (int y = 0; y < 17; y += 4)
      for (int x = 0; x < 23; x += 4) CHECK(t4.at(x, y) == t1.at(x, y));
    for (float v : t4.data()) CHECK(v > 0.f);
  }

  TEST_CASE("untrained or mismatched models rejected") {
    auto m = stub_models();
    const RgbImage img(8, 8);
    m.model.set_trained(false);
    CHECK_THROWS_AS((void)dehaze::transmission_map(img, m.model, m.forest), std::invalid_argument);
    m.model.set_trained(true);
    dehaze::TransmissionOptions o;
    o.feature_layer = net::FeatureLayer::kPool2;
    CHECK_THROWS_AS((void)dehaze::transmission_map(img, m.model, m.forest, o), std::invalid_argument);
    CHECK_THROWS_AS((void)dehaze::transmission_map(img, m.model, rf::Forest{}), std::invalid_argument);
  }
}

TEST_SUITE("dehaze") {
  TEST_CASE("intermediates are returned and in range; runs are bit-identical") {
    const auto m = stub_models();
    const auto img = random_image(32, 24, 9);
    const auto r = dehaze::dehaze(img, m.model, m.forest);
    CHECK(image::same_size(r.output, img));
    CHECK(image::same_size(img, r.transmission));
    for (float v : r.transmission.data()) {
      CHECK(v > 0.f);
      CHECK(v <= 1.f);
    }
    for (float v : r.output.data()) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
    CHECK(r.lambda >= 1.0);
    const auto again = dehaze::dehaze(img, m.model, m.forest);
    CHECK(again.output == r.output);
    CHECK(again.transmission == r.transmission);
    CHECK(again.atmosphere == r.atmosphere);
  }

  TEST_CASE("stage failures name the stage") {
    auto m = stub_models();
    m.model.set_trained(false);
    try {
      (void)dehaze::dehaze(random_image(8, 8, 1), m.model, m.forest);
      FAIL("expected DehazeError");
    } catch (const dehaze::DehazeError& e) {
      CHECK(std::string(e.what()).find("transmission map") != std::string::npos);
    }
    m.model.set_trained(true);
    dehaze::DehazeOptions o;
    o.guided_eps = 0;
    try {
      (void)dehaze::dehaze(random_image(8, 8, 1), m.model, m.forest, o);
      FAIL("expected DehazeError");
    } catch (const dehaze::DehazeError& e) {
      CHECK(std::string(e.what()).find("guided filter") != std::string::npos);
    }
    CHECK_THROWS_AS((void)dehaze::dehaze(RgbImage{}, m.model, m.forest), dehaze::DehazeError);
  }
}
