#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rankdehaze::rf {

/// Row-major N x D matrix of features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.f) {}

  [[nodiscard]] std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  [[nodiscard]] std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  float& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  [[nodiscard]] float at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct ForestConfig {
  int n_trees = 200;
  /// Share of the feature dimensions each tree may split on (rounded up).
  double feature_frac = 1.0 / 3.0;
  int min_leaf = 5;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

struct TreeNode {
  std::int32_t feature = -1;  ///< -1 marks a leaf
  double threshold = 0;       ///< go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0;  ///< mean target of the training samples in the node
};

struct Tree {
  std::vector<std::uint32_t> features;  ///< this tree's feature subset, ascending
  std::vector<TreeNode> nodes;          ///< nodes[0] is the root

  [[nodiscard]] double predict(std::span<const float> x) const;
  [[nodiscard]] std::size_t leaf_count() const;
};

/// Bagged CART regression trees. Each tree draws a bootstrap sample and a
/// fixed random subset of the feature dimensions, then splits greedily on
/// squared-error reduction until a node holds fewer than 2 * min_leaf
/// samples or is pure. Importance of a dimension is the total squared-error
/// reduction of its splits summed over all trees.
class Forest {
 public:
  Forest() = default;
  Forest(std::size_t dim, std::vector<Tree> trees, std::vector<double> importance, ForestConfig config);

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] const std::vector<Tree>& trees() const { return trees_; }
  [[nodiscard]] const std::vector<double>& importance() const { return importance_; }
  [[nodiscard]] const ForestConfig& config() const { return config_; }

  /// Mean of the per-tree leaf values.
  [[nodiscard]] double predict(std::span<const float> x) const;
  [[nodiscard]] std::vector<double> predict(const FeatureMatrix& x, int threads = 1) const;

 private:
  std::size_t dim_ = 0;
  std::vector<Tree> trees_;
  std::vector<double> importance_;
  ForestConfig config_;
};

/// Targets must lie in (0, 1]; needs at least two samples.
Forest fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestConfig& config);

/// Single tree on the given sample indices (duplicates allowed) restricted
/// to `features`. Adds squared-error reductions into `importance`.
Tree fit_tree(const FeatureMatrix& x, std::span<const double> y, std::span<const std::size_t> sample,
              std::vector<std::uint32_t> features, int min_leaf, std::vector<double>& importance);

// Forest file (little-endian):
//   "RFOR"  u32 version  u32 dim  u32 tree count
//   config: i32 min_leaf  f64 feature_frac  u8 bootstrap  u64 seed
//   per tree: u32 subset size, u32 subset[]; u32 node count, then per node
//             i32 feature  f64 threshold  i32 left  i32 right  f64 value
//   f64 importance[dim]
inline constexpr std::uint32_t kForestFormatVersion = 1;

std::vector<std::uint8_t> encode_forest(const Forest& forest);
Forest decode_forest(std::vector<std::uint8_t> bytes, const std::string& source = "forest");
void save_forest(const std::filesystem::path& path, const Forest& forest);
Forest load_forest(const std::filesystem::path& path);

/// dimension,importance rows.
void write_importance_csv(const std::filesystem::path& path, std::span<const double> importance);

/// Mean absolute error of predictions against targets.
double mean_absolute_error(std::span<const double> prediction, std::span<const double> target);

}  // namespace rankdehaze::rf
