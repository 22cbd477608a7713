#include "rankdehaze/ranking_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "rankdehaze/loss.hpp"
#include "rankdehaze/model_io.hpp"
#include "rankdehaze/parallel.hpp"
#include "rankdehaze/rng.hpp"

namespace rankdehaze::net {

using nn::ConvLayer;
using nn::DenseLayer;
using nn::MaxPoolLayer;
using nn::RankLayer;
using nn::ReluLayer;

namespace {

constexpr const char* kPlacementNames[] = {"none", "conv1", "pool1", "conv2", "conv3", "pool2"};

std::vector<nn::Layer<float>> make_layers(Placement placement, Head head) {
  std::vector<nn::Layer<float>> L;
  auto maybe_rank = [&](Placement here) {
    if (placement == here) L.emplace_back(RankLayer{});
  };
  L.emplace_back(ConvLayer<float>(3, 32, 5));
  L.emplace_back(ReluLayer{});
  maybe_rank(Placement::kAfterConv1);
  L.emplace_back(MaxPoolLayer{});
  maybe_rank(Placement::kAfterPool1);
  L.emplace_back(ConvLayer<float>(32, 32, 3));
  L.emplace_back(ReluLayer{});
  maybe_rank(Placement::kAfterConv2);
  L.emplace_back(ConvLayer<float>(32, 32, 3));
  L.emplace_back(ReluLayer{});
  maybe_rank(Placement::kAfterConv3);
  L.emplace_back(MaxPoolLayer{});
  maybe_rank(Placement::kAfterPool2);
  L.emplace_back(DenseLayer<float>(128, 64));
  L.emplace_back(ReluLayer{});
  L.emplace_back(DenseLayer<float>(64, 64));
  L.emplace_back(DenseLayer<float>(64, head == Head::kClassifier ? kNumBins : 1));
  return L;
}

std::vector<float> to_vector(const nn::Tensor<float>& t) {
  return {t.values().begin(), t.values().end()};
}

}  // namespace

std::string to_string(Placement placement) { return kPlacementNames[static_cast<int>(placement)]; }

Placement parse_placement(const std::string& name) {
  for (int i = 0; i < 6; ++i) {
    if (name == kPlacementNames[i]) return static_cast<Placement>(i);
  }
  throw std::invalid_argument("unknown ranking placement '" + name +
                              "' (expected none, conv1, pool1, conv2, conv3 or pool2)");
}

std::vector<Placement> all_placements() {
  return {Placement::kAfterConv1, Placement::kAfterPool1, Placement::kAfterConv2,
          Placement::kAfterConv3, Placement::kAfterPool2};
}

std::string to_string(FeatureLayer layer) {
  switch (layer) {
    case FeatureLayer::kPool2: return "pool2";
    case FeatureLayer::kFc1: return "fc1";
    case FeatureLayer::kFc2: return "fc2";
  }
  return "?";
}

FeatureLayer parse_feature_layer(const std::string& name) {
  if (name == "pool2") return FeatureLayer::kPool2;
  if (name == "fc1") return FeatureLayer::kFc1;
  if (name == "fc2") return FeatureLayer::kFc2;
  throw std::invalid_argument("unknown feature layer '" + name + "' (expected pool2, fc1 or fc2)");
}

RankingCnn RankingCnn::build(Placement placement, std::uint64_t seed, Head head) {
  RankingCnn m;
  m.network_ = nn::Network<float>({3, synth::kPatchSize, synth::kPatchSize}, make_layers(placement, head));
  m.network_.initialize(seed);
  m.placement_ = placement;
  m.head_ = head;
  return m;
}

RankingCnn RankingCnn::from_network(nn::Network<float> network, bool trained) {
  const auto& layers = network.layers();
  Placement placement = Placement::kNone;
  int convs = 0, pools = 0, ranks = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto kind = nn::kind_of(layers[i]);
    if (kind == nn::LayerKind::kConv) ++convs;
    if (kind == nn::LayerKind::kMaxPool) ++pools;
    if (kind != nn::LayerKind::kRank) continue;
    ++ranks;
    const auto prev = i > 0 ? nn::kind_of(layers[i - 1]) : nn::LayerKind::kRank;
    if (prev == nn::LayerKind::kMaxPool) {
      placement = pools == 1 ? Placement::kAfterPool1 : Placement::kAfterPool2;
    } else if (prev == nn::LayerKind::kRelu && convs >= 1 && convs <= 3 && pools == convs / 2) {
      placement = convs == 1 ? Placement::kAfterConv1
                             : convs == 2 ? Placement::kAfterConv2 : Placement::kAfterConv3;
    } else {
      throw std::invalid_argument("network has a ranking layer at an unsupported position " +
                                  std::to_string(i));
    }
  }
  if (ranks > 1) throw std::invalid_argument("network has more than one ranking layer");
  const auto& out = network.output_shape();
  const Head head = out.size() == 1 ? Head::kRegression : Head::kClassifier;
  const auto reference = make_layers(placement, head);
  bool same = reference.size() == layers.size() &&
              network.input_shape() == nn::Shape{3, synth::kPatchSize, synth::kPatchSize};
  for (std::size_t i = 0; same && i < layers.size(); ++i) {
    same = nn::kind_of(layers[i]) == nn::kind_of(reference[i]);
    if (same && layers[i].index() == reference[i].index()) {
      if (const auto* c = std::get_if<ConvLayer<float>>(&layers[i])) {
        const auto& r = std::get<ConvLayer<float>>(reference[i]);
        same = c->in_channels == r.in_channels && c->out_channels == r.out_channels && c->kernel == r.kernel;
      } else if (const auto* d = std::get_if<DenseLayer<float>>(&layers[i])) {
        const auto& r = std::get<DenseLayer<float>>(reference[i]);
        same = d->inputs == r.inputs && d->outputs == r.outputs;
      }
    }
  }
  if (!same) throw std::invalid_argument("network layer stack is not a Ranking-CNN");
  RankingCnn m;
  m.network_ = std::move(network);
  m.placement_ = placement;
  m.head_ = head;
  m.trained_ = trained;
  return m;
}

std::size_t RankingCnn::feature_stop(FeatureLayer layer) const {
  // The last three parameterized layers are dense(128,64), dense(64,64), dense(64,out).
  const std::size_t n = network_.depth();
  switch (layer) {
    case FeatureLayer::kPool2: return n - 4;
    case FeatureLayer::kFc1: return n - 2;
    case FeatureLayer::kFc2: return n - 1;
  }
  return n - 1;
}

std::size_t RankingCnn::feature_dim(FeatureLayer layer) const {
  return network_.output_shape(feature_stop(layer) - 1).size();
}

std::vector<float> RankingCnn::logits(const nn::Tensor<float>& patch) const {
  return to_vector(network_.forward(patch));
}

std::vector<float> RankingCnn::features(const nn::Tensor<float>& patch, FeatureLayer layer) const {
  return to_vector(network_.forward(patch, feature_stop(layer)));
}

std::vector<float> RankingCnn::output_from_features(const std::vector<float>& fc2) const {
  const auto& out = std::get<DenseLayer<float>>(network_.layers().back());
  return to_vector(nn::dense(nn::Tensor<float>({static_cast<int>(fc2.size()), 1, 1}, fc2), out));
}

std::vector<float> RankingCnn::classify(const nn::Tensor<float>& patch) const {
  if (head_ != Head::kClassifier) throw std::logic_error("classify: model has a regression head");
  const auto z = logits(patch);
  return nn::softmax<float>(z);
}

BinLabel RankingCnn::predict_bin(const nn::Tensor<float>& patch) const {
  if (head_ == Head::kRegression) return bin_label(predict_transmission(patch));
  const auto z = logits(patch);
  return {static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()) + 1};
}

double RankingCnn::predict_transmission(const nn::Tensor<float>& patch) const {
  if (head_ != Head::kRegression) throw std::logic_error("predict_transmission: model has a classifier head");
  return std::clamp(static_cast<double>(logits(patch)[0]), 1e-3, 1.0);
}

void RankingCnn::save(const std::filesystem::path& path,
                      const std::optional<nn::TrainConfig>& config) const {
  nn::save_network(path, network_, trained_, config);
}

RankingCnn RankingCnn::load(const std::filesystem::path& path) {
  auto stored = nn::load_network(path);
  return from_network(std::move(stored.network), stored.trained);
}

Split split_holdout(const synth::PatchDataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout fraction must be in [0, 1)");
  const std::size_t per = std::max<std::size_t>(1, dataset.provenance.per_patch);
  const std::size_t groups = (dataset.size() + per - 1) / per;
  std::vector<std::size_t> order(groups);
  for (std::size_t g = 0; g < groups; ++g) order[g] = g;
  Rng rng(derive_seed(seed, 0x686f6c64ULL));
  for (std::size_t i = groups; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(groups)));
  std::vector<bool> is_val(groups, false);
  for (std::size_t k = 0; k < held; ++k) is_val[order[k]] = true;
  Split split;
  for (std::size_t i = 0; i < dataset.size(); ++i) (is_val[i / per] ? split.validation : split.train).push_back(i);
  return split;
}

double accuracy(const RankingCnn& model, const synth::PatchDataset& dataset,
                std::span<const std::size_t> indices, int threads) {
  if (indices.empty()) return 0.0;
  std::vector<char> hit(indices.size());
  parallel_for(indices.size(), threads, [&](std::size_t k) {
    const auto& s = dataset.samples.at(indices[k]);
    hit[k] = model.predict_bin(s.hazy) == s.label;
  });
  std::size_t n = 0;
  for (char h : hit) n += h;
  return static_cast<double>(n) / static_cast<double>(indices.size());
}

std::vector<EpochRecord> train(RankingCnn& model, const synth::PatchDataset& dataset,
                               const Split& split, const nn::TrainConfig& config,
                               const TrainOptions& options) {
  config.validate();
  if (split.train.empty()) throw std::invalid_argument("train: no training samples");
  auto& net = model.network();
  for (std::size_t i = 0; i < net.depth(); ++i) {
    if (auto* p = net.params(i)) p->reset_velocity();
  }
  const std::size_t n = split.train.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t batches = (n + batch - 1) / batch;
  std::vector<std::size_t> order(split.train);
  std::vector<EpochRecord> history;
  std::int64_t iter = 0;

  std::vector<nn::Gradients<float>> per_sample(batch);
  std::vector<double> losses(batch);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.rng_seed, 0x1000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    double epoch_loss = 0;
    double lr = nn::lr_at(iter, config);
    for (std::size_t b = 0; b < batches; ++b, ++iter) {
      const std::size_t first = b * batch;
      const std::size_t count = std::min(batch, n - first);
      parallel_for(count, options.threads, [&](std::size_t k) {
        const auto& s = dataset.samples.at(order[first + k]);
        nn::Trace<float> trace;
        net.forward(s.hazy, trace);
        const auto out = trace.activations.back().values();
        auto loss = model.head() == Head::kClassifier
                        ? nn::softmax_xent<float>(out, s.label.index())
                        : nn::squared_error<float>(out, static_cast<float>(s.transmission));
        losses[k] = loss.loss;
        per_sample[k] = net.backward(trace, loss.grad, false);
      });
      double batch_loss = 0;
      for (std::size_t k = 0; k < count; ++k) batch_loss += losses[k];
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(b) + " (iteration " + std::to_string(iter) +
                            "); first sample index " + std::to_string(order[first]));
      }
      epoch_loss += batch_loss;
      nn::Gradients<float> sum = std::move(per_sample[0]);
      for (std::size_t k = 1; k < count; ++k) sum.accumulate(per_sample[k]);
      sum.scale(1.0f / static_cast<float>(count));
      lr = nn::lr_at(iter, config);
      for (std::size_t i = 0; i < net.depth(); ++i) {
        if (auto* p = net.params(i)) nn::sgd_step(*p, sum.layers[i], lr, config.momentum);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.mean_loss = epoch_loss / static_cast<double>(n);
    rec.learning_rate = lr;
    rec.validation_accuracy = accuracy(model, dataset, split.validation, options.threads);
    history.push_back(rec);
    if (options.log) {
      *options.log << "epoch " << rec.epoch << "/" << config.epochs << "  loss " << std::fixed
                   << std::setprecision(4) << rec.mean_loss << "  val_acc " << rec.validation_accuracy
                   << "  lr " << std::setprecision(6) << rec.learning_rate << std::defaultfloat << "\n";
    }
  }
  model.set_trained(true);
  return history;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,mean_loss,validation_accuracy,learning_rate\n" << std::setprecision(9);
  for (const auto& r : history) {
    out << r.epoch << "," << r.mean_loss << "," << r.validation_accuracy << "," << r.learning_rate << "\n";
  }
  if (!out) throw std::runtime_error("error writing " + path.string());
}

}  // namespace rankdehaze::net
