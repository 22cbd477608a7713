#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "rankdehaze/gradcheck.hpp"
#include "rankdehaze/model_io.hpp"
#include "rankdehaze/ranking_net.hpp"
#include "test_support.hpp"

using namespace rankdehaze;
using net::Placement;
using net::RankingCnn;

namespace {

synth::PatchDataset small_dataset(std::size_t patches, int per_patch, std::uint64_t seed) {
  const auto imgs = synth::procedural_images(8, 48, 48, seed);
  return synth::build_dataset(synth::sample_clear_patches(imgs, patches, seed + 1), per_patch, seed + 2);
}

nn::Tensor<float> random_patch(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::random_tensor<float>({3, 20, 20}, rng, 0.0, 1.0);
}

}  // namespace

TEST_SUITE("ranking-cnn structure") {
  TEST_CASE("default placement puts ranking fourth in the stack") {
    const auto m = RankingCnn::build(net::kDefaultPlacement, 1);
    CHECK(m.placement() == Placement::kAfterPool1);
    const auto& L = m.network().layers();
    REQUIRE(L.size() == 13);
    CHECK(nn::kind_of(L[0]) == nn::LayerKind::kConv);
    CHECK(nn::kind_of(L[2]) == nn::LayerKind::kMaxPool);
    CHECK(nn::kind_of(L[3]) == nn::LayerKind::kRank);
    CHECK(m.network().output_shape(2) == nn::Shape{32, 8, 8});
    CHECK(m.network().output_shape() == nn::Shape{10, 1, 1});
  }

  TEST_CASE("parameter count identical across placements") {
    const auto base = RankingCnn::build(Placement::kNone, 1).network().parameter_count();
    CHECK(base == 32 * 3 * 25 + 32 + 2 * (32 * 32 * 9 + 32) + 128 * 64 + 64 + 64 * 64 + 64 + 64 * 10 + 10);
    for (auto p : net::all_placements()) {
      const auto m = RankingCnn::build(p, 1);
      CHECK(m.network().parameter_count() == base);
      CHECK(m.network().depth() == 13);
    }
    CHECK(RankingCnn::build(Placement::kNone, 1).network().depth() == 12);
  }

  TEST_CASE("zero patch gives finite logits") {
    const auto m = RankingCnn::build(net::kDefaultPlacement, 2);
    const auto z = m.logits(nn::Tensor<float>({3, 20, 20}, 0.f));
    REQUIRE(z.size() == 10);
    for (float v : z) CHECK(std::isfinite(v));
  }

  TEST_CASE("placement names and inference from a network") {
    for (auto p : {Placement::kNone, Placement::kAfterConv1, Placement::kAfterPool1,
                   Placement::kAfterConv2, Placement::kAfterConv3, Placement::kAfterPool2}) {
      CHECK(net::parse_placement(net::to_string(p)) == p);
      for (auto head : {net::Head::kClassifier, net::Head::kRegression}) {
        const auto m = RankingCnn::build(p, 3, head);
        const auto back = RankingCnn::from_network(m.network(), false);
        CHECK(back.placement() == p);
        CHECK(back.head() == head);
      }
    }
    CHECK_THROWS_AS(net::parse_placement("conv4"), std::invalid_argument);
    CHECK_THROWS_AS(net::parse_feature_layer("fc3"), std::invalid_argument);
  }

  TEST_CASE("foreign networks rejected") {
    std::vector<nn::Layer<float>> layers;
    layers.emplace_back(nn::DenseLayer<float>(1200, 10));
    CHECK_THROWS_AS(RankingCnn::from_network(nn::Network<float>({3, 20, 20}, std::move(layers)), false),
                    std::invalid_argument);
  }

  TEST_CASE("wrong patch shape rejected") {
    const auto m = RankingCnn::build(net::kDefaultPlacement, 2);
    CHECK_THROWS_AS(m.features(nn::Tensor<float>({3, 19, 20})), nn::ShapeError);
    CHECK_THROWS_AS(m.classify(nn::Tensor<float>({1, 20, 20})), nn::ShapeError);
  }
}

TEST_SUITE("ranking-cnn inference") {
  TEST_CASE("features are deterministic and feed the output layer") {
    const auto m = RankingCnn::build(net::kDefaultPlacement, 4);
    const auto x = random_patch(1);
    const auto f = m.features(x);
    CHECK(f.size() == 64);
    CHECK(f == m.features(x));
    CHECK(m.output_from_features(f) == m.logits(x));
    CHECK(m.feature_dim(net::FeatureLayer::kPool2) == 128);
    CHECK(m.feature_dim(net::FeatureLayer::kFc1) == 64);
    CHECK(m.features(x, net::FeatureLayer::kPool2).size() == 128);
    for (float v : m.features(x, net::FeatureLayer::kFc1)) CHECK(v >= 0.f);
  }

  TEST_CASE("classify is a distribution with the logits argmax") {
    const auto m = RankingCnn::build(net::kDefaultPlacement, 5);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto x = random_patch(s);
      const auto p = m.classify(x);
      double sum = 0;
      for (float v : p) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-6);
      const auto z = m.logits(x);
      CHECK(std::max_element(p.begin(), p.end()) - p.begin() == std::max_element(z.begin(), z.end()) - z.begin());
      CHECK(m.predict_bin(x).index() == std::max_element(z.begin(), z.end()) - z.begin());
    }
  }

  TEST_CASE("full network gradients match finite differences") {
    std::mt19937_64 rng(21);
    for (auto p : {Placement::kAfterPool1, Placement::kNone}) {
      const auto net64 = RankingCnn::build(p, 8).network().cast<double>();
      for (int k = 0; k < 2; ++k) {
        const auto x = testing::distinct_tensor({3, 20, 20}, rng, 0.0, 1.0);
        nn::GradCheckOptions opt;
        opt.max_coords_per_blob = 40;
        opt.seed = static_cast<std::uint64_t>(k);
        const auto r = nn::grad_check(net64, x, k * 3, opt);
        CAPTURE(r.worst_blob);
        CAPTURE(r.max_relative_error);
        CHECK(r.passed);
        CHECK(r.checked > 300);
      }
    }
  }
}

TEST_SUITE("ranking-cnn training") {
  TEST_CASE("holdout split groups patches and covers the dataset") {
    const auto ds = small_dataset(200, 10, 1);
    const auto split = net::split_holdout(ds, 0.05, 3);
    CHECK(split.validation.size() == 100);
    CHECK(split.train.size() + split.validation.size() == ds.size());
    std::set<std::size_t> val_groups(split.validation.begin(), split.validation.end());
    for (std::size_t i : split.train) CHECK(val_groups.count(i) == 0);
    std::set<std::size_t> groups;
    for (std::size_t i : split.validation) groups.insert(i / 10);
    CHECK(groups.size() == 10);
  }

  TEST_CASE("single sample overfits in 50 iterations") {
    auto ds = small_dataset(1, 1, 5);
    net::Split split{{0}, {}};
    auto m = RankingCnn::build(net::kDefaultPlacement, 6);
    nn::TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.epochs = 50;
    const auto initial = nn::softmax_xent<float>(m.logits(ds.samples[0].hazy), ds.samples[0].label.index()).loss;
    const auto h = net::train(m, ds, split, cfg);
    // Each epoch is one iteration here; the loss falls until it underflows to 0.
    for (std::size_t i = 1; i < h.size(); ++i) {
      if (h[i - 1].mean_loss > 0) CHECK(h[i].mean_loss < h[i - 1].mean_loss);
    }
    const auto final = nn::softmax_xent<float>(m.logits(ds.samples[0].hazy), ds.samples[0].label.index()).loss;
    CAPTURE(initial);
    CAPTURE(final);
    CHECK(final < 0.1f * initial);
  }

  TEST_CASE("untrained model is at chance on a balanced set") {
    const auto ds = small_dataset(300, 10, 7);
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    double mean = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) mean += net::accuracy(RankingCnn::build(net::kDefaultPlacement, seed), ds, all);
    mean /= 5;
    CHECK(mean > 0.03);
    CHECK(mean < 0.2);
  }

  TEST_CASE("training is bit-reproducible and thread-count independent") {
    const auto ds = small_dataset(40, 5, 9);
    const auto split = net::split_holdout(ds, 0.1, 1);
    nn::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    auto a = RankingCnn::build(net::kDefaultPlacement, 3);
    auto b = RankingCnn::build(net::kDefaultPlacement, 3);
    const auto ha = net::train(a, ds, split, cfg, {1, nullptr});
    const auto hb = net::train(b, ds, split, cfg, {3, nullptr});
    CHECK(nn::encode_network(a.network(), true) == nn::encode_network(b.network(), true));
    REQUIRE(ha.size() == 2);
    CHECK(ha[1].mean_loss == hb[1].mean_loss);
    CHECK(a.trained());
  }

  TEST_CASE("history csv has one row per epoch") {
    const auto ds = small_dataset(20, 5, 11);
    const auto split = net::split_holdout(ds, 0.1, 1);
    nn::TrainConfig cfg;
    cfg.epochs = 3;
    auto m = RankingCnn::build(Placement::kNone, 3);
    const auto h = net::train(m, ds, split, cfg);
    const auto path = std::filesystem::temp_directory_path() / "rankdehaze_history.csv";
    net::write_history_csv(path, h);
    std::ifstream in(path);
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);
    CHECK(h[2].learning_rate == doctest::Approx(nn::lr_at(3 * 2 - 1, cfg)));
  }

  TEST_CASE("non-finite loss aborts with the batch named") {
    // A runaway learning rate drives the logits to infinity.
    const auto ds = small_dataset(4, 2, 13);
    auto m = RankingCnn::build(net::kDefaultPlacement, 1);
    nn::TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.initial_lr = 1e30;
    try {
      net::train(m, ds, net::Split{{0, 1, 2, 3, 4, 5, 6, 7}, {}}, cfg);
      FAIL("expected TrainingError");
    } catch (const net::TrainingError& e) {
      CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
  }

  TEST_CASE("regression head trains on squared error") {
    const auto ds = small_dataset(60, 5, 15);
    const auto split = net::split_holdout(ds, 0.1, 1);
    nn::TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 16;
    auto m = RankingCnn::build(net::kDefaultPlacement, 3, net::Head::kRegression);
    const auto h = net::train(m, ds, split, cfg);
    CHECK(h.back().mean_loss < h.front().mean_loss);
    const double t = m.predict_transmission(ds.samples[0].hazy);
    CHECK(t > 0.0);
    CHECK(t <= 1.0);
  }

  TEST_CASE("save and load keep the model") {
    const auto m = RankingCnn::build(Placement::kAfterConv2, 17);
    const auto path = std::filesystem::temp_directory_path() / "rankdehaze_model.rcnn";
    nn::TrainConfig cfg;
    cfg.epochs = 7;
    m.save(path, cfg);
    const auto back = RankingCnn::load(path);
    CHECK(back.placement() == Placement::kAfterConv2);
    CHECK_FALSE(back.trained());
    const auto x = random_patch(3);
    CHECK(back.logits(x) == m.logits(x));
    CHECK(nn::load_network(path).config->epochs == 7);
  }
}
