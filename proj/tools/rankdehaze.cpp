// rankdehaze: dataset synthesis, training, forest fitting, dehazing,
// benchmarks and ablations from the command line.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rankdehaze/binary_io.hpp"
#include "rankdehaze/dehaze.hpp"
#include "rankdehaze/eval.hpp"
#include "rankdehaze/experiment.hpp"
#include "rankdehaze/parallel.hpp"
#include "rankdehaze/rng.hpp"

namespace fs = std::filesystem;
using namespace rankdehaze;

namespace {

// Bad flags, paths or input files: exit code 2.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using namespace experiment::seeds;

struct Globals {
  std::string config;
  std::uint64_t seed = 1;
  int threads = 0;
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UserError(what + " path is required");
  if (!fs::is_regular_file(path)) throw UserError(what + " '" + path + "' does not exist");
}

void require_dir(const std::string& path, const std::string& what) {
  if (!fs::is_directory(path)) throw UserError(what + " '" + path + "' is not a directory");
}

void require_writable(const std::string& path, const std::string& what) {
  if (path.empty()) throw UserError(what + " path is required");
  const auto parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) throw UserError(what + ": directory '" + parent.string() + "' does not exist");
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  const auto stem = p.stem().string();
  return (p.parent_path() / (stem + suffix)).string();
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UserError("bad size list '" + text + "'");
    }
  }
  if (out.empty()) throw UserError("empty size list");
  return out;
}

// key=value lines become leading "--key=value" arguments right after the
// subcommand, so flags given on the command line come later and win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw UserError("cannot read config file '" + path + "'");
  std::vector<std::string> extra;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UserError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    std::replace(key.begin(), key.end(), '_', '-');
    extra.push_back("--" + key + "=" + value);
  }
  // args[0] is the subcommand when present.
  const auto at = args.empty() || args[0].rfind('-', 0) == 0 ? args.begin() : args.begin() + 1;
  args.insert(at, extra.begin(), extra.end());
  return args;
}

void print_histogram(const synth::PatchDataset& ds) {
  const auto h = ds.bin_histogram();
  std::cout << "bin histogram:";
  for (std::size_t b = 0; b < h.size(); ++b) std::cout << " " << (b + 1) << ":" << h[b];
  std::cout << "\n";
}

// ---- synth

struct SynthArgs {
  std::string images, out;
  bool procedural = false;
  std::size_t image_count = 60;
  int image_size = 128;
  std::size_t patches = 2000;
  int per_patch = 10;
};

int cmd_synth(const SynthArgs& a, const Globals& g) {
  require_writable(a.out, "output dataset");
  if (a.procedural == !a.images.empty()) throw UserError("give exactly one of --images DIR or --procedural");
  if (a.per_patch < 1 || a.patches == 0) throw UserError("--patches and --per-patch must be positive");
  const int threads = resolve_threads(g.threads);
  std::vector<image::RgbImage> imgs;
  std::vector<std::string> sources;
  if (a.procedural) {
    if (a.image_count == 0 || a.image_size < synth::kPatchSize) throw UserError("bad procedural image settings");
    imgs = synth::procedural_images(a.image_count, a.image_size, a.image_size, derive_seed(g.seed, kImages));
  } else {
    require_dir(a.images, "image directory");
    const auto files = synth::list_images(a.images);
    if (files.empty()) throw UserError("no PNG/PPM images in '" + a.images + "'");
    for (const auto& f : files) {
      imgs.push_back(image::read_image(f));
      sources.push_back(f.filename().string());
    }
  }
  auto patches = synth::sample_clear_patches(imgs, a.patches, derive_seed(g.seed, kPatches));
  auto ds = synth::build_dataset(std::move(patches), a.per_patch, derive_seed(g.seed, kHaze), threads);
  if (!sources.empty()) ds.provenance.sources = std::move(sources);
  synth::write_dataset(a.out, ds);
  std::cout << "wrote " << a.out << ": " << ds.size() << " samples from " << ds.provenance.clear_patches
            << " clear patches (" << a.per_patch << " per patch)\n";
  print_histogram(ds);
  return 0;
}

// ---- train

struct TrainArgs {
  std::string dataset, out, history, placement = "pool1", head = "classifier";
  int epochs = 10, batch = 64;
  double lr = 0.01, momentum = 0.9, holdout = 0.05;
};

net::Head parse_head(const std::string& s) {
  if (s == "classifier") return net::Head::kClassifier;
  if (s == "regression") return net::Head::kRegression;
  throw UserError("unknown head '" + s + "' (expected classifier or regression)");
}

int cmd_train(const TrainArgs& a, const Globals& g) {
  require_file(a.dataset, "dataset");
  require_writable(a.out, "output model");
  const std::string history = a.history.empty() ? with_suffix(a.out, ".history.csv") : a.history;
  require_writable(history, "history CSV");
  net::Placement placement;
  try {
    placement = net::parse_placement(a.placement);
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  const auto head = parse_head(a.head);
  nn::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.initial_lr = a.lr;
  tc.momentum = a.momentum;
  tc.rng_seed = derive_seed(g.seed, kOrder);
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  if (!(a.holdout >= 0 && a.holdout < 1)) throw UserError("--holdout must be in [0, 1)");

  const auto ds = synth::read_dataset(a.dataset);
  const auto split = net::split_holdout(ds, a.holdout, derive_seed(g.seed, kHoldout));
  std::cout << "training " << net::to_string(placement) << " on " << split.train.size() << " samples, "
            << split.validation.size() << " held out\n";
  auto model = net::RankingCnn::build(placement, derive_seed(g.seed, kWeights), head);
  const auto records = net::train(model, ds, split, tc, {resolve_threads(g.threads), &std::cout});
  model.save(a.out, tc);
  net::write_history_csv(history, records);
  std::cout << "wrote " << a.out << " and " << history << "\n";
  return 0;
}

// ---- fit-rf

struct FitArgs {
  std::string dataset, model, out, importance, feature_layer = "fc2";
  std::size_t samples = 10000;
  int trees = 200, min_leaf = 5;
  double feature_frac = 1.0 / 3.0, holdout = 0.05;
};

int cmd_fit_rf(const FitArgs& a, const Globals& g) {
  require_file(a.dataset, "dataset");
  require_file(a.model, "model");
  require_writable(a.out, "output forest");
  const std::string importance = a.importance.empty() ? with_suffix(a.out, ".importance.csv") : a.importance;
  require_writable(importance, "importance CSV");
  net::FeatureLayer layer;
  try {
    layer = net::parse_feature_layer(a.feature_layer);
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  rf::ForestConfig fc;
  fc.n_trees = a.trees;
  fc.min_leaf = a.min_leaf;
  fc.feature_frac = a.feature_frac;
  fc.seed = derive_seed(g.seed, kRegressorFit);
  fc.threads = resolve_threads(g.threads);
  try {
    fc.validate();
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  if (a.samples < 2) throw UserError("--samples must be at least 2");

  const auto ds = synth::read_dataset(a.dataset);
  const auto model = net::RankingCnn::load(a.model);
  if (model.head() != net::Head::kClassifier) throw UserError("fit-rf needs a classifier-head model");
  const auto split = net::split_holdout(ds, a.holdout, derive_seed(g.seed, kHoldout));
  if (a.samples > split.train.size()) {
    std::cerr << "warning: --samples " << a.samples << " exceeds the " << split.train.size()
              << " training samples; using all of them\n";
  }
  const auto chosen = experiment::random_subset(split.train, a.samples, derive_seed(g.seed, kRegressorSubset));
  const auto x = experiment::feature_matrix(model, ds, chosen, layer, fc.threads);
  const auto forest = rf::fit_forest(x, experiment::targets(ds, chosen), fc);
  rf::save_forest(a.out, forest);
  rf::write_importance_csv(importance, forest.importance());
  const double total = std::accumulate(forest.importance().begin(), forest.importance().end(), 0.0);
  std::cout << "wrote " << a.out << ": " << forest.trees().size() << " trees on " << chosen.size() << " samples of "
            << x.cols << "-D " << net::to_string(layer) << " features\n";
  std::cout << "importance sum " << std::setprecision(9) << total << " (" << importance << ")\n";
  if (!split.validation.empty()) {
    const auto xv = experiment::feature_matrix(model, ds, split.validation, layer, fc.threads);
    const double l1 = rf::mean_absolute_error(forest.predict(xv, fc.threads), experiment::targets(ds, split.validation));
    std::cout << "validation L1 in transmission " << std::fixed << std::setprecision(4) << l1 << std::defaultfloat
              << " on " << split.validation.size() << " samples\n";
  }
  return 0;
}

// ---- dehaze

struct PipelineArgs {
  int dark_window = 15, radius = 40, stride = 1;
  double eps = 1e-3;
  bool no_exposure = false;
  std::string feature_layer = "fc2";

  [[nodiscard]] dehaze::DehazeOptions options(int threads) const {
    dehaze::DehazeOptions o;
    o.dark_window = dark_window;
    o.guided_radius = radius;
    o.guided_eps = eps;
    o.adjust_exposure = !no_exposure;
    o.transmission.stride = stride;
    o.transmission.threads = threads;
    try {
      o.transmission.feature_layer = net::parse_feature_layer(feature_layer);
    } catch (const std::invalid_argument& e) {
      throw UserError(e.what());
    }
    if (dark_window < 1 || dark_window % 2 == 0) throw UserError("--dark-window must be odd and positive");
    if (radius < 0 || !(eps > 0) || stride < 1) throw UserError("bad --radius, --eps or --stride");
    return o;
  }
};

void add_pipeline_flags(CLI::App* app, PipelineArgs& p) {
  app->add_option("--dark-window", p.dark_window, "Dark channel window (odd)")->capture_default_str();
  app->add_option("--radius", p.radius, "Guided filter radius")->capture_default_str();
  app->add_option("--eps", p.eps, "Guided filter regularization")->capture_default_str();
  app->add_option("--stride", p.stride, "Transmission prediction stride")->capture_default_str();
  app->add_option("--feature-layer", p.feature_layer, "pool2, fc1 or fc2")->capture_default_str();
  app->add_flag("--no-exposure", p.no_exposure, "Skip exposure adjustment");
}

struct DehazeArgs {
  std::string input, model, forest, out;
  bool emit_transmission = false, emit_atmosphere = false;
  PipelineArgs pipeline;
};

int cmd_dehaze(const DehazeArgs& a, const Globals& g) {
  require_file(a.input, "input image");
  require_file(a.model, "model");
  require_file(a.forest, "forest");
  require_writable(a.out, "output image");
  const auto options = a.pipeline.options(resolve_threads(g.threads));
  const auto hazy = image::read_image(a.input);
  const auto model = net::RankingCnn::load(a.model);
  const auto forest = rf::load_forest(a.forest);
  const auto r = dehaze::dehaze(hazy, model, forest, options);
  image::write_image(a.out, r.output);
  std::cout << "wrote " << a.out << "  A = " << std::setprecision(6) << r.atmosphere[0] << " " << r.atmosphere[1]
            << " " << r.atmosphere[2] << "  lambda = " << r.lambda << "\n";
  if (a.emit_transmission) {
    const auto path = with_suffix(a.out, ".transmission.png");
    image::write_plane_png16(path, r.transmission);
    std::cout << "wrote " << path << "\n";
  }
  if (a.emit_atmosphere) {
    const auto path = with_suffix(a.out, ".atmosphere.txt");
    dehaze::write_atmosphere(path, r.atmosphere);
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string cases, model, forest, out, text;
  std::size_t procedural = 10;
  int case_size = 96;
  PipelineArgs pipeline;
};

int cmd_eval(const EvalArgs& a, const Globals& g) {
  if (!a.cases.empty()) require_dir(a.cases, "case directory");
  if (a.model.empty() != a.forest.empty()) throw UserError("give both --model and --forest, or neither");
  if (!a.model.empty()) {
    require_file(a.model, "model");
    require_file(a.forest, "forest");
  }
  if (!a.out.empty()) require_writable(a.out, "report CSV");
  if (!a.text.empty()) require_writable(a.text, "report text");
  const auto options = a.pipeline.options(resolve_threads(g.threads));
  if (a.cases.empty() && (a.procedural == 0 || a.case_size < synth::kPatchSize)) {
    throw UserError("bad procedural case settings");
  }
  const auto cases = a.cases.empty() ? eval::procedural_cases(a.procedural, a.case_size, a.case_size, g.seed)
                                     : eval::load_cases(a.cases);
  std::vector<eval::Method> methods{eval::noop_method(), eval::oracle_method()};
  net::RankingCnn model;
  rf::Forest forest;
  if (!a.model.empty()) {
    model = net::RankingCnn::load(a.model);
    forest = rf::load_forest(a.forest);
    methods.push_back(eval::pipeline_method(model, forest, options));
  }
  const auto report = eval::benchmark_methods(cases, methods, &std::cerr);
  eval::write_text(std::cout, report);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    eval::write_csv(out, report);
    if (!out) throw std::runtime_error("cannot write " + a.out);
  }
  if (!a.text.empty()) {
    std::ofstream out(a.text);
    eval::write_text(out, report);
  }
  return 0;
}

// ---- ablate

struct AblateArgs {
  std::string name, images, out, text, data_sizes = "500,1000,2000";
  experiment::ExperimentConfig config;
};

int cmd_ablate(AblateArgs a, const Globals& g) {
  const auto names = experiment::ablation_names();
  if (std::find(names.begin(), names.end(), a.name) == names.end()) {
    throw UserError("unknown ablation '" + a.name + "'");
  }
  if (!a.images.empty()) require_dir(a.images, "image directory");
  if (!a.out.empty()) require_writable(a.out, "report CSV");
  if (!a.text.empty()) require_writable(a.text, "report text");
  a.config.data_sizes = parse_sizes(a.data_sizes);
  a.config.seed = g.seed;
  a.config.threads = resolve_threads(g.threads);
  try {
    a.config.validate();
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  std::optional<fs::path> dir;
  if (!a.images.empty()) dir = a.images;
  const auto exp = experiment::prepare(a.config, dir);
  const auto report = experiment::run_ablation(a.name, exp, &std::cerr);
  experiment::write_text(std::cout, report);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    experiment::write_csv(out, report);
  }
  if (!a.text.empty()) {
    std::ofstream out(a.text);
    experiment::write_text(out, report);
  }
  const bool any_failed = std::any_of(report.arms.begin(), report.arms.end(), [](const auto& r) { return r.failed; });
  return any_failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-image dehazing with a Ranking-CNN and a random forest", "rankdehaze"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Globals g;
  app.add_option("--config", g.config, "key=value file; keys mirror flag names, flags win");
  app.add_option("--seed", g.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: RANKDEHAZE_THREADS or all cores)")->capture_default_str();

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Synthesize a hazy patch dataset");
  synth_cmd->add_option("--images", sa.images, "Directory of clear PNG/PPM images");
  synth_cmd->add_flag("--procedural", sa.procedural, "Use procedural images");
  synth_cmd->add_option("--image-count", sa.image_count, "Procedural image count")->capture_default_str();
  synth_cmd->add_option("--image-size", sa.image_size, "Procedural image side")->capture_default_str();
  synth_cmd->add_option("--patches", sa.patches, "Clear patches")->capture_default_str();
  synth_cmd->add_option("--per-patch", sa.per_patch, "Hazy samples per clear patch")->capture_default_str();
  synth_cmd->add_option("--out", sa.out, "Output .rcds file");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train the network on a dataset");
  train_cmd->add_option("--dataset", ta.dataset, "Input .rcds file");
  train_cmd->add_option("--out", ta.out, "Output model file");
  train_cmd->add_option("--history", ta.history, "History CSV (default: <out>.history.csv)");
  train_cmd->add_option("--epochs", ta.epochs)->capture_default_str();
  train_cmd->add_option("--batch", ta.batch)->capture_default_str();
  train_cmd->add_option("--lr", ta.lr, "Initial learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", ta.momentum)->capture_default_str();
  train_cmd->add_option("--holdout", ta.holdout, "Fraction of clear patches held out")->capture_default_str();
  train_cmd->add_option("--placement", ta.placement, "none, conv1, pool1, conv2, conv3, pool2")->capture_default_str();
  train_cmd->add_option("--head", ta.head, "classifier or regression")->capture_default_str();

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit-rf", "Fit the transmission forest on network features");
  fit_cmd->add_option("--dataset", fa.dataset, "Input .rcds file");
  fit_cmd->add_option("--model", fa.model, "Trained model file");
  fit_cmd->add_option("--out", fa.out, "Output forest file");
  fit_cmd->add_option("--importance", fa.importance, "Importance CSV (default: <out>.importance.csv)");
  fit_cmd->add_option("--samples", fa.samples, "Training samples drawn for the forest")->capture_default_str();
  fit_cmd->add_option("--trees", fa.trees)->capture_default_str();
  fit_cmd->add_option("--min-leaf", fa.min_leaf)->capture_default_str();
  fit_cmd->add_option("--feature-frac", fa.feature_frac, "Fraction of dimensions per tree")->capture_default_str();
  fit_cmd->add_option("--feature-layer", fa.feature_layer, "pool2, fc1 or fc2")->capture_default_str();
  fit_cmd->add_option("--holdout", fa.holdout, "Must match the value used for train")->capture_default_str();

  DehazeArgs da;
  auto* dehaze_cmd = app.add_subcommand("dehaze", "Dehaze one image");
  dehaze_cmd->add_option("--input", da.input, "Hazy PNG/PPM image");
  dehaze_cmd->add_option("--model", da.model, "Trained model file");
  dehaze_cmd->add_option("--forest", da.forest, "Forest file");
  dehaze_cmd->add_option("--out", da.out, "Output image (.png or .ppm)");
  dehaze_cmd->add_flag("--emit-transmission", da.emit_transmission, "Also write <out>.transmission.png (16-bit)");
  dehaze_cmd->add_flag("--emit-atmosphere", da.emit_atmosphere, "Also write <out>.atmosphere.txt");
  add_pipeline_flags(dehaze_cmd, da.pipeline);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Benchmark on synthesized cases");
  eval_cmd->add_option("--cases", ea.cases, "Case directory (default: procedural cases)");
  eval_cmd->add_option("--procedural", ea.procedural, "Number of procedural cases")->capture_default_str();
  eval_cmd->add_option("--case-size", ea.case_size, "Procedural case side")->capture_default_str();
  eval_cmd->add_option("--model", ea.model, "Trained model file");
  eval_cmd->add_option("--forest", ea.forest, "Forest file");
  eval_cmd->add_option("--out", ea.out, "Report CSV");
  eval_cmd->add_option("--text", ea.text, "Aligned text report");
  add_pipeline_flags(eval_cmd, ea.pipeline);

  AblateArgs aa;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run one ablation study");
  ablate_cmd->add_option("--name", aa.name,
                         "ranking-vs-plain, placement, feature-layer, regressor, end-to-end, data-size");
  ablate_cmd->add_option("--images", aa.images, "Directory of clear images (default: procedural)");
  ablate_cmd->add_option("--image-count", aa.config.images)->capture_default_str();
  ablate_cmd->add_option("--image-size", aa.config.image_size)->capture_default_str();
  ablate_cmd->add_option("--patches", aa.config.patches)->capture_default_str();
  ablate_cmd->add_option("--per-patch", aa.config.per_patch)->capture_default_str();
  ablate_cmd->add_option("--holdout", aa.config.holdout)->capture_default_str();
  ablate_cmd->add_option("--epochs", aa.config.epochs)->capture_default_str();
  ablate_cmd->add_option("--samples", aa.config.forest_samples, "Forest training samples")->capture_default_str();
  ablate_cmd->add_option("--trees", aa.config.trees)->capture_default_str();
  ablate_cmd->add_option("--data-sizes", aa.data_sizes, "Clear patches per data-size arm")->capture_default_str();
  ablate_cmd->add_option("--out", aa.out, "Report CSV");
  ablate_cmd->add_option("--text", aa.text, "Aligned text report");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*synth_cmd) return cmd_synth(sa, g);
    if (*train_cmd) return cmd_train(ta, g);
    if (*fit_cmd) return cmd_fit_rf(fa, g);
    if (*dehaze_cmd) return cmd_dehaze(da, g);
    if (*eval_cmd) return cmd_eval(ea, g);
    if (*ablate_cmd) return cmd_ablate(aa, g);
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const io::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const image::ImageIoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dehaze::DehazeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
