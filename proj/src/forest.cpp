#include "rankdehaze/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rankdehaze/binary_io.hpp"
#include "rankdehaze/parallel.hpp"
#include "rankdehaze/rng.hpp"

namespace rankdehaze::rf {

namespace {

struct Candidate {
  double gain = 0;
  std::size_t slot = 0;  // index into the tree's feature list
  std::size_t pos = 0;   // last position (in sorted order) of the left side
  double threshold = 0;
};

struct Pending {
  std::int32_t node;
  std::size_t begin, end;
};

}  // namespace

void ForestConfig::validate() const {
  if (n_trees < 1) throw std::invalid_argument("forest: n_trees must be >= 1");
  if (!(feature_frac > 0.0 && feature_frac <= 1.0)) throw std::invalid_argument("forest: feature_frac must be in (0, 1]");
  if (min_leaf < 1) throw std::invalid_argument("forest: min_leaf must be >= 1");
}

double Tree::predict(std::span<const float> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<double>(x[n.feature]) <= n.threshold ? n.left : n.right;
  }
  return nodes[i].value;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

Tree fit_tree(const FeatureMatrix& x, std::span<const double> y, std::span<const std::size_t> sample,
              std::vector<std::uint32_t> features, int min_leaf, std::vector<double>& importance) {
  const std::size_t n = sample.size();
  if (n == 0) throw std::invalid_argument("fit_tree: empty sample");
  Tree tree;
  tree.features = std::move(features);
  const std::size_t nf = tree.features.size();

  // order[f] lists sample positions sorted by feature value; every node owns
  // the same [begin, end) range in each list.
  std::vector<std::vector<std::uint32_t>> order(nf, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < nf; ++f) {
    auto& o = order[f];
    std::iota(o.begin(), o.end(), 0u);
    const std::uint32_t dim = tree.features[f];
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x.at(sample[a], dim) < x.at(sample[b], dim);
    });
  }
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = y[sample[i]];

  std::vector<char> goes_left(n);
  std::vector<Pending> stack{{0, 0, n}};
  tree.nodes.emplace_back();

  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    const std::size_t count = job.end - job.begin;
    auto position = [&](std::size_t k) -> std::size_t { return nf ? order[0][k] : k; };
    double sum = 0, lo = target[position(job.begin)], hi = lo;
    for (std::size_t k = job.begin; k < job.end; ++k) {
      const double t = target[position(k)];
      sum += t;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    tree.nodes[job.node].value = sum / static_cast<double>(count);
    if (nf == 0 || count < 2 * static_cast<std::size_t>(min_leaf) || lo == hi) continue;

    const double parent = sum * sum / static_cast<double>(count);
    Candidate best;
    for (std::size_t f = 0; f < nf; ++f) {
      const auto& o = order[f];
      const std::uint32_t dim = tree.features[f];
      double left_sum = 0;
      for (std::size_t k = job.begin; k + 1 < job.end; ++k) {
        left_sum += target[o[k]];
        const std::size_t nl = k + 1 - job.begin;
        const std::size_t nr = count - nl;
        if (nl < static_cast<std::size_t>(min_leaf)) continue;
        if (nr < static_cast<std::size_t>(min_leaf)) break;
        const float a = x.at(sample[o[k]], dim);
        const float b = x.at(sample[o[k + 1]], dim);
        if (!(a < b)) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - parent;
        if (gain > best.gain) {
          double mid = 0.5 * (static_cast<double>(a) + static_cast<double>(b));
          if (!(mid < static_cast<double>(b))) mid = a;
          best = {gain, f, k, mid};
        }
      }
    }
    if (best.gain <= 0) continue;

    const auto& chosen = order[best.slot];
    for (std::size_t k = job.begin; k < job.end; ++k) goes_left[chosen[k]] = k <= best.pos;
    for (std::size_t f = 0; f < nf; ++f) {
      auto& o = order[f];
      std::stable_partition(o.begin() + static_cast<std::ptrdiff_t>(job.begin),
                            o.begin() + static_cast<std::ptrdiff_t>(job.end),
                            [&](std::uint32_t p) { return goes_left[p] != 0; });
    }
    const std::size_t split = best.pos + 1;
    const auto left = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[job.node];
    node.feature = static_cast<std::int32_t>(tree.features[best.slot]);
    node.threshold = best.threshold;
    node.left = left;
    node.right = left + 1;
    importance[tree.features[best.slot]] += best.gain;
    stack.push_back({left + 1, split, job.end});
    stack.push_back({left, job.begin, split});
  }
  return tree;
}

Forest::Forest(std::size_t dim, std::vector<Tree> trees, std::vector<double> importance, ForestConfig config)
    : dim_(dim), trees_(std::move(trees)), importance_(std::move(importance)), config_(config) {
  if (importance_.size() != dim_) throw std::invalid_argument("forest: importance size does not match dim");
}

double Forest::predict(std::span<const float> x) const {
  if (x.size() != dim_) {
    throw std::invalid_argument("forest predict: feature vector has " + std::to_string(x.size()) +
                                " dimensions, model expects " + std::to_string(dim_));
  }
  if (trees_.empty()) throw std::logic_error("forest predict: model has no trees");
  double s = 0;
  for (const auto& t : trees_) s += t.predict(x);
  return s / static_cast<double>(trees_.size());
}

std::vector<double> Forest::predict(const FeatureMatrix& x, int threads) const {
  std::vector<double> out(x.rows);
  parallel_for(x.rows, threads, [&](std::size_t i) { out[i] = predict(x.row(i)); });
  return out;
}

Forest fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestConfig& config) {
  config.validate();
  if (x.rows < 2) throw std::invalid_argument("fit_forest: need at least 2 samples");
  if (y.size() != x.rows) throw std::invalid_argument("fit_forest: target count does not match rows");
  if (x.cols == 0) throw std::invalid_argument("fit_forest: zero feature dimensions");
  for (double t : y) {
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("fit_forest: target " + std::to_string(t) + " outside (0, 1]");
  }
  const auto n_sub = std::min<std::size_t>(
      x.cols, static_cast<std::size_t>(std::ceil(config.feature_frac * static_cast<double>(x.cols) - 1e-9)));
  std::vector<Tree> trees(config.n_trees);
  std::vector<std::vector<double>> imps(config.n_trees, std::vector<double>(x.cols, 0.0));
  parallel_for(trees.size(), config.threads, [&](std::size_t t) {
    Rng rng(derive_seed(config.seed, t));
    std::vector<std::size_t> sample(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) sample[i] = config.bootstrap ? uniform_index(rng, x.rows) : i;
    std::vector<std::uint32_t> dims(x.cols);
    std::iota(dims.begin(), dims.end(), 0u);
    for (std::size_t i = 0; i < n_sub; ++i) std::swap(dims[i], dims[i + uniform_index(rng, x.cols - i)]);
    dims.resize(n_sub);
    std::sort(dims.begin(), dims.end());
    trees[t] = fit_tree(x, y, sample, std::move(dims), config.min_leaf, imps[t]);
  });
  std::vector<double> importance(x.cols, 0.0);
  for (const auto& imp : imps)
    for (std::size_t d = 0; d < x.cols; ++d) importance[d] += imp[d];
  return Forest(x.cols, std::move(trees), std::move(importance), config);
}

std::vector<std::uint8_t> encode_forest(const Forest& forest) {
  io::ByteWriter w;
  w.put_magic("RFOR");
  w.put<std::uint32_t>(kForestFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(forest.dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(forest.trees().size()));
  const auto& c = forest.config();
  w.put<std::int32_t>(c.min_leaf);
  w.put<double>(c.feature_frac);
  w.put<std::uint8_t>(c.bootstrap ? 1 : 0);
  w.put<std::uint64_t>(c.seed);
  for (const auto& t : forest.trees()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.features.size()));
    w.put_array<std::uint32_t>(t.features);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& n : t.nodes) {
      w.put<std::int32_t>(n.feature);
      w.put<double>(n.threshold);
      w.put<std::int32_t>(n.left);
      w.put<std::int32_t>(n.right);
      w.put<double>(n.value);
    }
  }
  w.put_array<double>(forest.importance());
  return w.bytes();
}

Forest decode_forest(std::vector<std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic("RFOR");
  const auto version = r.get<std::uint32_t>("format version");
  if (version != kForestFormatVersion) {
    r.fail("forest format version " + std::to_string(version) + " is not supported (expected version " +
           std::to_string(kForestFormatVersion) + ")");
  }
  const auto dim = r.get<std::uint32_t>("dimension");
  const auto n_trees = r.get<std::uint32_t>("tree count");
  if (dim == 0) r.fail("forest has zero dimensions");
  ForestConfig c;
  c.n_trees = static_cast<int>(n_trees);
  c.min_leaf = r.get<std::int32_t>("min_leaf");
  c.feature_frac = r.get<double>("feature_frac");
  c.bootstrap = r.get<std::uint8_t>("bootstrap flag") != 0;
  c.seed = r.get<std::uint64_t>("seed");
  std::vector<Tree> trees;
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    Tree tree;
    const auto nf = r.get<std::uint32_t>("subset size");
    if (nf > dim) r.fail("tree feature subset larger than dimension");
    tree.features.resize(nf);
    r.get_array<std::uint32_t>(tree.features, "feature subset");
    for (auto f : tree.features) {
      if (f >= dim) r.fail("feature index " + std::to_string(f) + " out of range");
    }
    const auto nodes = r.get<std::uint32_t>("node count");
    if (nodes == 0 || nodes > r.remaining() / 28) r.fail("implausible node count " + std::to_string(nodes));
    tree.nodes.resize(nodes);
    for (auto& n : tree.nodes) {
      n.feature = r.get<std::int32_t>("node feature");
      n.threshold = r.get<double>("node threshold");
      n.left = r.get<std::int32_t>("node left");
      n.right = r.get<std::int32_t>("node right");
      n.value = r.get<double>("node value");
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& n = tree.nodes[i];
      if (n.feature < 0) continue;
      const auto limit = static_cast<std::int32_t>(nodes);
      if (static_cast<std::uint32_t>(n.feature) >= dim || n.left <= static_cast<std::int32_t>(i) ||
          n.right <= static_cast<std::int32_t>(i) || n.left >= limit || n.right >= limit) {
        r.fail("tree " + std::to_string(t) + " node " + std::to_string(i) + " is malformed");
      }
    }
    trees.push_back(std::move(tree));
  }
  std::vector<double> importance(dim);
  r.get_array<double>(importance, "importance");
  if (!r.at_end()) r.fail("trailing bytes after importance");
  return Forest(dim, std::move(trees), std::move(importance), c);
}

void save_forest(const std::filesystem::path& path, const Forest& forest) {
  io::write_file(path, encode_forest(forest));
}

Forest load_forest(const std::filesystem::path& path) {
  return decode_forest(io::read_file(path), path.string());
}

void write_importance_csv(const std::filesystem::path& path, std::span<const double> importance) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "dimension,importance\n" << std::setprecision(12);
  for (std::size_t d = 0; d < importance.size(); ++d) out << d << "," << importance[d] << "\n";
  if (!out) throw std::runtime_error("error writing " + path.string());
}

double mean_absolute_error(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size() || target.empty()) {
    throw std::invalid_argument("mean_absolute_error: size mismatch or empty input");
  }
  double s = 0;
  for (std::size_t i = 0; i < target.size(); ++i) s += std::abs(prediction[i] - target[i]);
  return s / static_cast<double>(target.size());
}

}  // namespace rankdehaze::rf
