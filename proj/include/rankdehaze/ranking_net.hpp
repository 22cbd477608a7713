#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankdehaze/bins.hpp"
#include "rankdehaze/network.hpp"
#include "rankdehaze/optim.hpp"
#include "rankdehaze/synth.hpp"

namespace rankdehaze::net {

/// Where the ranking layer goes. Placements after a convolution sit after
/// its ReLU. kNone builds the classical CNN used as the control.
enum class Placement { kNone, kAfterConv1, kAfterPool1, kAfterConv2, kAfterConv3, kAfterPool2 };

inline constexpr Placement kDefaultPlacement = Placement::kAfterPool1;

/// "none", "conv1", "pool1", "conv2", "conv3", "pool2".
std::string to_string(Placement placement);
Placement parse_placement(const std::string& name);
std::vector<Placement> all_placements();

enum class Head {
  kClassifier,  ///< dense 64 -> 10, soft-max cross-entropy on the bin
  kRegression,  ///< dense 64 -> 1, squared error on t (comparison variant only)
};

enum class FeatureLayer {
  kPool2,  ///< 128-D input of the first dense layer
  kFc1,    ///< 64-D output of the first dense layer (after ReLU)
  kFc2,    ///< 64-D output of the second dense layer, the default feature
};

std::string to_string(FeatureLayer layer);
FeatureLayer parse_feature_layer(const std::string& name);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The ten-layer network on 3x20x20 patches:
/// conv5x5(32) relu pool [rank] conv3x3(32) relu conv3x3(32) relu pool
/// dense(128,64) relu dense(64,64) dense(64,10).
class RankingCnn {
 public:
  RankingCnn() = default;

  static RankingCnn build(Placement placement, std::uint64_t seed, Head head = Head::kClassifier);
  /// Wraps a loaded network, inferring placement and head. Throws
  /// std::invalid_argument when the layer stack is not a Ranking-CNN.
  static RankingCnn from_network(nn::Network<float> network, bool trained);

  [[nodiscard]] Placement placement() const { return placement_; }
  [[nodiscard]] Head head() const { return head_; }
  [[nodiscard]] bool trained() const { return trained_; }
  void set_trained(bool trained) { trained_ = trained; }
  [[nodiscard]] const nn::Network<float>& network() const { return network_; }
  [[nodiscard]] nn::Network<float>& network() { return network_; }

  /// Raw output of the last layer.
  [[nodiscard]] std::vector<float> logits(const nn::Tensor<float>& patch) const;
  /// Activation of the chosen layer; the output layer is not evaluated.
  [[nodiscard]] std::vector<float> features(const nn::Tensor<float>& patch,
                                            FeatureLayer layer = FeatureLayer::kFc2) const;
  [[nodiscard]] std::size_t feature_dim(FeatureLayer layer) const;
  /// Soft-max bin probabilities (classifier head).
  [[nodiscard]] std::vector<float> classify(const nn::Tensor<float>& patch) const;
  [[nodiscard]] BinLabel predict_bin(const nn::Tensor<float>& patch) const;
  /// Regression head output clamped into [1e-3, 1].
  [[nodiscard]] double predict_transmission(const nn::Tensor<float>& patch) const;
  /// Applies the output layer to a kFc2 feature vector.
  [[nodiscard]] std::vector<float> output_from_features(const std::vector<float>& fc2) const;

  /// Layer count run to produce the given feature.
  [[nodiscard]] std::size_t feature_stop(FeatureLayer layer) const;

  void save(const std::filesystem::path& path,
            const std::optional<nn::TrainConfig>& config = std::nullopt) const;
  static RankingCnn load(const std::filesystem::path& path);

 private:
  nn::Network<float> network_;
  Placement placement_ = kDefaultPlacement;
  Head head_ = Head::kClassifier;
  bool trained_ = false;
};

/// Sample indices for training and validation. Samples synthesized from one
/// clear patch stay on the same side.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

Split split_holdout(const synth::PatchDataset& dataset, double fraction, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0;
  double validation_accuracy = 0;
  double learning_rate = 0;
};

struct TrainOptions {
  int threads = 1;
  std::ostream* log = nullptr;
};

/// Mini-batch SGD with momentum on the hazy patches. Each epoch visits the
/// training indices in a fresh permutation drawn from the config seed. The
/// batch gradient is the mean of per-sample gradients, reduced in sample
/// order so results do not depend on the thread count.
std::vector<EpochRecord> train(RankingCnn& model, const synth::PatchDataset& dataset,
                               const Split& split, const nn::TrainConfig& config,
                               const TrainOptions& options = {});

/// Top-1 bin accuracy (classifier) or bin agreement of the predicted t
/// (regression head) over the given samples.
double accuracy(const RankingCnn& model, const synth::PatchDataset& dataset,
                std::span<const std::size_t> indices, int threads = 1);

/// epoch,mean_loss,validation_accuracy,learning_rate
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace rankdehaze::net
