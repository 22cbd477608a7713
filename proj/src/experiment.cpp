#include "rankdehaze/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rankdehaze/image.hpp"
#include "rankdehaze/parallel.hpp"
#include "rankdehaze/rng.hpp"

namespace rankdehaze::experiment {

using namespace seeds;

namespace {

std::string training_key(ArmConfig arm, const ExperimentConfig& config) {
  arm.feature_layer = net::FeatureLayer::kFc2;
  arm.regressor = Regressor::kForest;
  return serialize(arm, config);
}

std::vector<std::size_t> training_indices(const Experiment& exp, std::size_t patches) {
  if (patches == 0) return exp.split.train;
  const std::size_t per = std::max<std::size_t>(1, exp.dataset.provenance.per_patch);
  std::vector<std::size_t> out;
  for (std::size_t i : exp.split.train) {
    if (i / per < patches) out.push_back(i);
  }
  return out;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

rf::FeatureMatrix feature_matrix(const net::RankingCnn& model, const synth::PatchDataset& dataset,
                                 std::span<const std::size_t> indices, net::FeatureLayer layer, int threads) {
  const std::size_t dim = model.feature_dim(layer);
  rf::FeatureMatrix x(indices.size(), dim);
  parallel_for(indices.size(), threads, [&](std::size_t k) {
    const auto f = model.features(dataset.samples.at(indices[k]).hazy, layer);
    std::copy(f.begin(), f.end(), x.data.begin() + static_cast<std::ptrdiff_t>(k * dim));
  });
  return x;
}

std::vector<double> targets(const synth::PatchDataset& dataset, std::span<const std::size_t> indices) {
  std::vector<double> y;
  y.reserve(indices.size());
  for (std::size_t i : indices) y.push_back(dataset.samples.at(i).transmission);
  return y;
}

std::vector<std::size_t> random_subset(std::vector<std::size_t> indices, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = indices.size();
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) std::swap(indices[i], indices[i + uniform_index(rng, n - i)]);
  indices.resize(count);
  return indices;
}

void ExperimentConfig::validate() const {
  if (images == 0 || patches == 0) throw std::invalid_argument("experiment: images and patches must be positive");
  if (image_size < synth::kPatchSize) {
    throw std::invalid_argument("experiment: image size must be at least " + std::to_string(synth::kPatchSize));
  }
  if (per_patch < 1) throw std::invalid_argument("experiment: per_patch must be >= 1");
  if (!(holdout > 0.0 && holdout < 1.0)) throw std::invalid_argument("experiment: holdout must be in (0, 1)");
  if (epochs < 1) throw std::invalid_argument("experiment: epochs must be >= 1");
  if (forest_samples < 2) throw std::invalid_argument("experiment: forest_samples must be >= 2");
  if (trees < 1) throw std::invalid_argument("experiment: trees must be >= 1");
  for (std::size_t d : data_sizes) {
    if (d == 0) throw std::invalid_argument("experiment: data sizes must be positive");
  }
}

std::string to_string(Regressor r) {
  switch (r) {
    case Regressor::kForest: return "forest";
    case Regressor::kLinear: return "linear";
    case Regressor::kLogisticLink: return "logistic";
    case Regressor::kKernel: return "kernel";
  }
  return "?";
}

Regressor parse_regressor(const std::string& name) {
  if (name == "forest" || name == "rf") return Regressor::kForest;
  switch (rf::parse_baseline(name)) {
    case rf::BaselineKind::kLinear: return Regressor::kLinear;
    case rf::BaselineKind::kLogisticLink: return Regressor::kLogisticLink;
    case rf::BaselineKind::kKernel: return Regressor::kKernel;
  }
  throw std::invalid_argument("unknown regressor '" + name + "'");
}

std::string serialize(const ArmConfig& arm, const ExperimentConfig& c) {
  std::ostringstream s;
  s << "placement=" << net::to_string(arm.placement) << "\n"
    << "head=" << (arm.head == net::Head::kClassifier ? "classifier" : "regression") << "\n"
    << "feature_layer=" << net::to_string(arm.feature_layer) << "\n"
    << "regressor=" << to_string(arm.regressor) << "\n"
    << "train_patches=" << (arm.train_patches ? arm.train_patches : c.patches) << "\n"
    << "images=" << c.images << "\n"
    << "image_size=" << c.image_size << "\n"
    << "patches=" << c.patches << "\n"
    << "per_patch=" << c.per_patch << "\n"
    << "holdout=" << c.holdout << "\n"
    << "epochs=" << c.epochs << "\n"
    << "forest_samples=" << c.forest_samples << "\n"
    << "trees=" << c.trees << "\n"
    << "seed=" << c.seed << "\n";
  return s.str();
}

Experiment prepare(const ExperimentConfig& config, const std::optional<std::filesystem::path>& images_dir) {
  config.validate();
  Experiment exp;
  exp.config = config;
  std::vector<image::RgbImage> images;
  std::vector<std::string> sources;
  if (images_dir) {
    for (const auto& p : synth::list_images(*images_dir)) {
      images.push_back(image::read_image(p));
      sources.push_back(p.filename().string());
    }
    if (images.empty()) throw std::invalid_argument("no PNG/PPM images in " + images_dir->string());
  } else {
    images = synth::procedural_images(config.images, config.image_size, config.image_size,
                                      derive_seed(config.seed, kImages));
  }
  auto patches = synth::sample_clear_patches(images, config.patches, derive_seed(config.seed, kPatches));
  exp.dataset = synth::build_dataset(std::move(patches), config.per_patch, derive_seed(config.seed, kHaze),
                                     config.threads);
  if (!sources.empty()) exp.dataset.provenance.sources = std::move(sources);
  exp.split = net::split_holdout(exp.dataset, config.holdout, derive_seed(config.seed, kHoldout));
  if (exp.split.validation.empty()) throw std::invalid_argument("experiment: holdout leaves no validation samples");
  return exp;
}

TrainedArm train_arm(const Experiment& exp, const ArmConfig& arm, std::ostream* log) {
  TrainedArm out;
  out.train = training_indices(exp, arm.train_patches);
  if (out.train.empty()) throw std::invalid_argument("arm " + arm.name + " has no training samples");
  out.model = net::RankingCnn::build(arm.placement, derive_seed(exp.config.seed, kWeights), arm.head);
  nn::TrainConfig tc;
  tc.epochs = exp.config.epochs;
  tc.rng_seed = derive_seed(exp.config.seed, kOrder);
  const net::Split split{out.train, exp.split.validation};
  out.history = net::train(out.model, exp.dataset, split, tc, {exp.config.threads, log});
  return out;
}

rf::Forest fit_transmission_forest(const net::RankingCnn& model, const synth::PatchDataset& dataset,
                                   std::span<const std::size_t> train, std::size_t max_samples,
                                   const rf::ForestConfig& forest_config, net::FeatureLayer layer,
                                   std::uint64_t seed, int threads) {
  const auto chosen = random_subset({train.begin(), train.end()}, max_samples, seed);
  const auto x = feature_matrix(model, dataset, chosen, layer, threads);
  return rf::fit_forest(x, targets(dataset, chosen), forest_config);
}

ArmResult evaluate_arm(const Experiment& exp, const ArmConfig& arm, const TrainedArm& trained) {
  const auto& c = exp.config;
  ArmResult r;
  r.name = arm.name;
  r.config = serialize(arm, c);
  r.train_samples = trained.train.size();
  if (!trained.history.empty()) {
    r.first_loss = trained.history.front().mean_loss;
    r.final_loss = trained.history.back().mean_loss;
  }
  const auto& val = exp.split.validation;
  const auto truth = targets(exp.dataset, val);
  r.validation_accuracy = net::accuracy(trained.model, exp.dataset, val, c.threads);
  std::vector<double> pred(val.size());
  if (arm.head == net::Head::kRegression) {
    parallel_for(val.size(), c.threads, [&](std::size_t k) {
      pred[k] = trained.model.predict_transmission(exp.dataset.samples[val[k]].hazy);
    });
  } else {
    const auto chosen = random_subset(trained.train, c.forest_samples, derive_seed(c.seed, kRegressorSubset));
    const auto x = feature_matrix(trained.model, exp.dataset, chosen, arm.feature_layer, c.threads);
    const auto y = targets(exp.dataset, chosen);
    const auto xv = feature_matrix(trained.model, exp.dataset, val, arm.feature_layer, c.threads);
    if (arm.regressor == Regressor::kForest) {
      rf::ForestConfig fc;
      fc.n_trees = c.trees;
      fc.seed = derive_seed(c.seed, kRegressorFit);
      fc.threads = c.threads;
      pred = rf::fit_forest(x, y, fc).predict(xv, c.threads);
    } else {
      rf::BaselineOptions bo;
      bo.seed = derive_seed(c.seed, kRegressorFit);
      const auto kind = arm.regressor == Regressor::kLinear         ? rf::BaselineKind::kLinear
                        : arm.regressor == Regressor::kLogisticLink ? rf::BaselineKind::kLogisticLink
                                                                    : rf::BaselineKind::kKernel;
      pred = rf::fit_baseline(kind, x, y, bo).predict(xv);
    }
  }
  r.validation_l1 = rf::mean_absolute_error(pred, truth);
  return r;
}

const ArmResult& AblationReport::at(const std::string& arm) const {
  for (const auto& a : arms) {
    if (a.name == arm) return a;
  }
  throw std::out_of_range("no arm named " + arm);
}

std::vector<std::string> ablation_names() {
  return {"ranking-vs-plain", "placement", "feature-layer", "regressor", "end-to-end", "data-size"};
}

std::vector<ArmConfig> ablation_arms(const std::string& name, const ExperimentConfig& config) {
  std::vector<ArmConfig> arms;
  const ArmConfig base{"ranking-cnn"};
  if (name == "ranking-vs-plain") {
    arms.push_back(base);
    ArmConfig plain = base;
    plain.name = "classical-cnn";
    plain.placement = net::Placement::kNone;
    arms.push_back(plain);
  } else if (name == "placement") {
    for (auto p : net::all_placements()) {
      ArmConfig a = base;
      a.name = net::to_string(p);
      a.placement = p;
      arms.push_back(a);
    }
  } else if (name == "feature-layer") {
    for (auto l : {net::FeatureLayer::kPool2, net::FeatureLayer::kFc1, net::FeatureLayer::kFc2}) {
      ArmConfig a = base;
      a.name = net::to_string(l);
      a.feature_layer = l;
      arms.push_back(a);
    }
  } else if (name == "regressor") {
    for (auto r : {Regressor::kForest, Regressor::kLinear, Regressor::kLogisticLink, Regressor::kKernel}) {
      ArmConfig a = base;
      a.name = to_string(r);
      a.regressor = r;
      arms.push_back(a);
    }
  } else if (name == "end-to-end") {
    arms.push_back(base);
    ArmConfig reg = base;
    reg.name = "regression-head";
    reg.head = net::Head::kRegression;
    arms.push_back(reg);
  } else if (name == "data-size") {
    for (std::size_t n : config.data_sizes) {
      ArmConfig a = base;
      a.name = std::to_string(n * static_cast<std::size_t>(config.per_patch)) + "-samples";
      a.train_patches = std::min(n, config.patches);
      arms.push_back(a);
    }
  } else {
    std::string known;
    for (const auto& n : ablation_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown ablation '" + name + "' (expected one of: " + known + ")");
  }
  return arms;
}

AblationReport run_ablation(const std::string& name, const Experiment& exp, std::ostream* log) {
  AblationReport report;
  report.name = name;
  const auto arms = ablation_arms(name, exp.config);
  std::map<std::string, TrainedArm> trained;
  for (const auto& arm : arms) {
    const auto t0 = std::chrono::steady_clock::now();
    if (log) *log << "arm " << arm.name << "\n";
    ArmResult r;
    try {
      const auto key = training_key(arm, exp.config);
      auto it = trained.find(key);
      if (it == trained.end()) it = trained.emplace(key, train_arm(exp, arm, log)).first;
      r = evaluate_arm(exp, arm, it->second);
    } catch (const std::exception& e) {
      r.name = arm.name;
      r.config = serialize(arm, exp.config);
      r.failed = true;
      r.error = e.what();
      if (log) *log << "warning: arm " << arm.name << " failed: " << e.what() << "\n";
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log && !r.failed) *log << "arm " << arm.name << "  validation L1(t) " << fixed(r.validation_l1) << "\n";
    report.arms.push_back(std::move(r));
  }
  return report;
}

void write_csv(std::ostream& out, const AblationReport& report) {
  out << "ablation,arm,validation_l1_transmission,validation_accuracy,first_epoch_loss,final_epoch_loss,"
         "train_samples,failed\n"
      << std::setprecision(9);
  for (const auto& a : report.arms) {
    out << report.name << "," << a.name << ",";
    if (!a.failed) {
      out << a.validation_l1 << "," << a.validation_accuracy << "," << a.first_loss << "," << a.final_loss << ","
          << a.train_samples;
    } else {
      out << ",,,,";
    }
    out << "," << (a.failed ? 1 : 0) << "\n";
  }
}

void write_text(std::ostream& out, const AblationReport& report) {
  std::size_t w = 5;
  for (const auto& a : report.arms) w = std::max(w, a.name.size());
  const int nw = static_cast<int>(w) + 2;
  out << "ablation: " << report.name << "\n"
      << std::left << std::setw(nw) << "arm" << std::setw(14) << "L1 in t" << std::setw(12) << "accuracy"
      << std::setw(12) << "loss 1st" << std::setw(12) << "loss last" << std::setw(10) << "samples"
      << "seconds\n";
  for (const auto& a : report.arms) {
    out << std::setw(nw) << a.name;
    if (a.failed) {
      out << "failed: " << a.error << "\n";
      continue;
    }
    out << std::setw(14) << fixed(a.validation_l1) << std::setw(12) << fixed(a.validation_accuracy)
        << std::setw(12) << fixed(a.first_loss) << std::setw(12) << fixed(a.final_loss) << std::setw(10)
        << a.train_samples << fixed(a.seconds, 1) << "\n";
  }
  out << std::right;
}

}  // namespace rankdehaze::experiment
