#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rankdehaze/baselines.hpp"
#include "rankdehaze/forest.hpp"
#include "rankdehaze/ranking_net.hpp"
#include "rankdehaze/synth.hpp"

namespace rankdehaze::experiment {

/// Substreams of the single seed. The CLI uses the same ones, so its train
/// and fit-rf steps reproduce the default arm of an ablation.
namespace seeds {
enum Stream : std::uint64_t {
  kImages = 1,
  kPatches = 2,
  kHaze = 3,
  kHoldout = 4,
  kWeights = 5,
  kOrder = 6,
  kRegressorSubset = 7,
  kRegressorFit = 8,
};
}  // namespace seeds

/// Features of the given samples' hazy patches, one row each.
rf::FeatureMatrix feature_matrix(const net::RankingCnn& model, const synth::PatchDataset& dataset,
                                 std::span<const std::size_t> indices, net::FeatureLayer layer,
                                 int threads = 1);

std::vector<double> targets(const synth::PatchDataset& dataset, std::span<const std::size_t> indices);

/// Up to `count` of `indices`, drawn without replacement, in drawn order.
std::vector<std::size_t> random_subset(std::vector<std::size_t> indices, std::size_t count, std::uint64_t seed);

/// Shared by every arm of an experiment.
struct ExperimentConfig {
  std::size_t images = 60;
  int image_size = 128;
  std::size_t patches = 2000;
  int per_patch = 10;
  double holdout = 0.05;
  int epochs = 10;
  std::size_t forest_samples = 10000;
  int trees = 200;
  /// Clear patches per arm of the data-size sweep.
  std::vector<std::size_t> data_sizes{500, 1000, 2000};
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

enum class Regressor { kForest, kLinear, kLogisticLink, kKernel };
std::string to_string(Regressor r);
Regressor parse_regressor(const std::string& name);

/// What may differ between arms.
struct ArmConfig {
  std::string name;
  net::Placement placement = net::kDefaultPlacement;
  net::Head head = net::Head::kClassifier;
  net::FeatureLayer feature_layer = net::FeatureLayer::kFc2;
  Regressor regressor = Regressor::kForest;
  /// Clear patches whose samples may be used for training; 0 = all.
  std::size_t train_patches = 0;
};

/// key=value lines covering the arm and the shared settings. Arm names are
/// left out so configs of different arms compare on substance alone.
std::string serialize(const ArmConfig& arm, const ExperimentConfig& config);

/// Dataset and held-out split shared by every arm.
struct Experiment {
  ExperimentConfig config;
  synth::PatchDataset dataset;
  net::Split split;
};

/// Builds the dataset from procedural images, or from the images found in
/// images_dir when given.
Experiment prepare(const ExperimentConfig& config, const std::optional<std::filesystem::path>& images_dir = {});

struct TrainedArm {
  net::RankingCnn model;
  std::vector<net::EpochRecord> history;
  std::vector<std::size_t> train;
};

/// Same network seed, data order and schedule for every arm.
TrainedArm train_arm(const Experiment& exp, const ArmConfig& arm, std::ostream* log = nullptr);

struct ArmResult {
  std::string name;
  std::string config;
  double validation_l1 = 0;
  double validation_accuracy = 0;
  double first_loss = 0;
  double final_loss = 0;
  std::size_t train_samples = 0;
  double seconds = 0;
  bool failed = false;
  std::string error;
};

/// Fits the arm's regressor on at most forest_samples training features and
/// scores L1 in t on the validation samples. A regression head is scored
/// on its own output.
ArmResult evaluate_arm(const Experiment& exp, const ArmConfig& arm, const TrainedArm& trained);

/// Forest on the features of a random subset of training samples.
rf::Forest fit_transmission_forest(const net::RankingCnn& model, const synth::PatchDataset& dataset,
                                   std::span<const std::size_t> train, std::size_t max_samples,
                                   const rf::ForestConfig& forest_config, net::FeatureLayer layer,
                                   std::uint64_t seed, int threads = 1);

struct AblationReport {
  std::string name;
  std::vector<ArmResult> arms;

  [[nodiscard]] const ArmResult& at(const std::string& arm) const;
};

/// "ranking-vs-plain", "placement", "feature-layer", "regressor",
/// "end-to-end", "data-size".
std::vector<std::string> ablation_names();
std::vector<ArmConfig> ablation_arms(const std::string& name, const ExperimentConfig& config);

/// Trains and scores every arm; arms sharing a training setup share one
/// trained network. Arm failures are recorded and the rest still run.
AblationReport run_ablation(const std::string& name, const Experiment& exp, std::ostream* log = nullptr);

void write_csv(std::ostream& out, const AblationReport& report);
void write_text(std::ostream& out, const AblationReport& report);

}  // namespace rankdehaze::experiment
