#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rankdehaze/dehaze.hpp"
#include "rankdehaze/forest.hpp"
#include "rankdehaze/ranking_net.hpp"

namespace rankdehaze::eval {

using dehaze::Atmosphere;
using image::Plane;
using image::RgbImage;
using image::TransmissionMap;

/// Disparity-driven cases use t = kDisparityScale * d.
inline constexpr double kDisparityScale = 0.8;

struct EvalCase {
  std::string name;
  RgbImage clear;
  TransmissionMap transmission;
  RgbImage hazy;
  std::optional<Plane> disparity;
  Atmosphere atmosphere{1.0, 1.0, 1.0};
};

/// I = J t + A (1 - t) per pixel, in double, rounded once.
RgbImage synthesize(const RgbImage& clear, const TransmissionMap& t, const Atmosphere& a = {1, 1, 1});

EvalCase make_constant_case(std::string name, RgbImage clear, double t);
/// Requires d in (0, 1]; t = 0.8 d.
EvalCase make_disparity_case(std::string name, RgbImage clear, Plane disparity);
/// Divides by the maximum so values lie in (0, 1]; non-positive entries
/// become the smallest positive value present (or 1 if none).
Plane normalize_disparity(const Plane& raw);

/// Outdoor-like scenes: a procedural texture under a bright sky band. The
/// first half use constant t, the rest a disparity ramp that is farthest at
/// the top.
std::vector<EvalCase> procedural_cases(std::size_t count, int width, int height, std::uint64_t seed);

/// Reads each subdirectory holding clear.png (or .ppm), optional
/// disparity.png and optional meta.txt ("t = 0.6" selects constant mode;
/// without disparity the default t is 0.6). Sorted by directory name.
std::vector<EvalCase> load_cases(const std::filesystem::path& dir);

double l1_transmission(const TransmissionMap& estimate, const TransmissionMap& truth);
double l1_image(const RgbImage& output, const RgbImage& clear);

struct MethodOutput {
  RgbImage image;
  std::optional<TransmissionMap> transmission;
};

struct Method {
  std::string name;
  std::function<MethodOutput(const EvalCase&)> run;
};

/// Output = hazy input.
Method noop_method();
/// Recovery with the true A and t, no exposure change.
Method oracle_method();
/// The full dehazing pipeline.
Method pipeline_method(const net::RankingCnn& model, const rf::Forest& forest,
                       const dehaze::DehazeOptions& options = {}, std::string name = "ranking-cnn");

struct CaseResult {
  std::string case_name;
  std::string method;
  std::optional<double> l1_transmission;
  double l1_image = 0;
  double seconds = 0;
  bool failed = false;
  std::string error;
};

struct EvalReport {
  std::vector<std::string> methods;
  std::vector<std::string> cases;
  std::vector<CaseResult> rows;  ///< case-major

  [[nodiscard]] const CaseResult& at(const std::string& case_name, const std::string& method) const;
  /// Mean over the non-failed cases of a method.
  [[nodiscard]] double mean_l1_image(const std::string& method) const;
  [[nodiscard]] std::optional<double> mean_l1_transmission(const std::string& method) const;
  [[nodiscard]] std::size_t failures(const std::string& method) const;
};

/// Runs every method on every case. Exceptions are recorded per row and
/// the row is left out of the averages.
EvalReport benchmark_methods(const std::vector<EvalCase>& cases, const std::vector<Method>& methods,
                             std::ostream* log = nullptr);

void write_csv(std::ostream& out, const EvalReport& report);
void write_text(std::ostream& out, const EvalReport& report);

}  // namespace rankdehaze::eval
