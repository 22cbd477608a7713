#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rankdehaze/forest.hpp"

namespace rankdehaze::rf {

enum class BaselineKind {
  kLinear,        ///< least squares on standardized features
  kLogisticLink,  ///< least squares on logit(t), prediction through the sigmoid
  kKernel,        ///< RBF kernel ridge, standing in for an SVM regressor
};

std::string to_string(BaselineKind kind);
BaselineKind parse_baseline(const std::string& name);

struct BaselineOptions {
  /// Ridge added to the normal equations (linear kinds) or the kernel diagonal.
  double linear_ridge = 1e-6;
  double kernel_ridge = 1e-1;
  /// RBF width; <= 0 means 1 / dim on standardized features.
  double gamma = 0.0;
  /// Kernel ridge fits on at most this many randomly chosen samples.
  std::size_t kernel_max_samples = 2000;
  /// logit(t) is taken on t clamped to [eps, 1 - eps].
  double logit_eps = 1e-3;
  std::uint64_t seed = 1;
};

class BaselineModel {
 public:
  [[nodiscard]] BaselineKind kind() const { return kind_; }
  /// Prediction clamped into [1e-3, 1].
  [[nodiscard]] double predict(std::span<const float> x) const;
  [[nodiscard]] std::vector<double> predict(const FeatureMatrix& x) const;

 private:
  friend BaselineModel fit_baseline(BaselineKind, const FeatureMatrix&, std::span<const double>,
                                    const BaselineOptions&);
  [[nodiscard]] double raw(std::span<const float> x) const;

  BaselineKind kind_ = BaselineKind::kLinear;
  std::vector<double> mean_, scale_;
  std::vector<double> weights_;  // linear kinds: dim coefficients then the intercept
  double gamma_ = 0;
  double offset_ = 0;
  std::vector<double> support_;  // kernel: standardized rows, row-major
  std::vector<double> alpha_;
};

/// Singular or ill-conditioned systems are regularized, never rejected.
BaselineModel fit_baseline(BaselineKind kind, const FeatureMatrix& x, std::span<const double> y,
                           const BaselineOptions& options = {});

}  // namespace rankdehaze::rf
