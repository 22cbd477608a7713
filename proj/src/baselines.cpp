#include "rankdehaze/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rankdehaze/rng.hpp"

namespace rankdehaze::rf {

namespace {

double logit(double t) { return std::log(t / (1.0 - t)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kLinear: return "linear";
    case BaselineKind::kLogisticLink: return "logistic";
    case BaselineKind::kKernel: return "kernel";
  }
  return "?";
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "linear") return BaselineKind::kLinear;
  if (name == "logistic") return BaselineKind::kLogisticLink;
  if (name == "kernel" || name == "svm") return BaselineKind::kKernel;
  throw std::invalid_argument("unknown baseline '" + name + "' (expected linear, logistic or kernel)");
}

BaselineModel fit_baseline(BaselineKind kind, const FeatureMatrix& x, std::span<const double> y,
                           const BaselineOptions& options) {
  if (x.rows < 2 || y.size() != x.rows) throw std::invalid_argument("fit_baseline: need >= 2 rows and one target per row");
  const std::size_t n = x.rows, d = x.cols;
  BaselineModel m;
  m.kind_ = kind;
  m.mean_.assign(d, 0.0);
  m.scale_.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0, ss = 0;
    for (std::size_t i = 0; i < n; ++i) s += x.at(i, j);
    const double mu = s / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) ss += (x.at(i, j) - mu) * (x.at(i, j) - mu);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    m.mean_[j] = mu;
    m.scale_[j] = sd > 1e-12 ? sd : 1.0;
  }
  auto z = [&](std::size_t i, std::size_t j) { return (x.at(i, j) - m.mean_[j]) / m.scale_[j]; };

  if (kind == BaselineKind::kKernel) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    const std::size_t k = std::min(n, options.kernel_max_samples);
    if (k < n) {
      Rng rng(derive_seed(options.seed, 0x6b726e6cULL));
      for (std::size_t i = 0; i < k; ++i) std::swap(rows[i], rows[i + uniform_index(rng, n - i)]);
      rows.resize(k);
      std::sort(rows.begin(), rows.end());
    }
    m.gamma_ = options.gamma > 0 ? options.gamma : 1.0 / static_cast<double>(std::max<std::size_t>(d, 1));
    m.support_.resize(k * d);
    double mean_y = 0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t j = 0; j < d; ++j) m.support_[a * d + j] = z(rows[a], j);
      mean_y += y[rows[a]];
    }
    mean_y /= static_cast<double>(k);
    m.offset_ = mean_y;
    Eigen::MatrixXd K(k, k);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b <= a; ++b) {
        double dist = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = m.support_[a * d + j] - m.support_[b * d + j];
          dist += diff * diff;
        }
        K(a, b) = K(b, a) = std::exp(-m.gamma_ * dist);
      }
      K(a, a) += options.kernel_ridge;
    }
    Eigen::VectorXd r(k);
    for (std::size_t a = 0; a < k; ++a) r(a) = y[rows[a]] - mean_y;
    const Eigen::VectorXd alpha = K.ldlt().solve(r);
    m.alpha_.assign(alpha.data(), alpha.data() + k);
    return m;
  }

  Eigen::MatrixXd A(n, d + 1);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) A(i, j) = z(i, j);
    A(i, d) = 1.0;
    const double t = y[i];
    b(i) = kind == BaselineKind::kLinear
               ? t
               : logit(std::clamp(t, options.logit_eps, 1.0 - options.logit_eps));
  }
  Eigen::MatrixXd normal = A.transpose() * A;
  for (std::size_t j = 0; j < d; ++j) normal(j, j) += options.linear_ridge * static_cast<double>(n);
  const Eigen::VectorXd w = normal.ldlt().solve(A.transpose() * b);
  m.weights_.assign(w.data(), w.data() + d + 1);
  return m;
}

double BaselineModel::raw(std::span<const float> x) const {
  const std::size_t d = mean_.size();
  if (x.size() != d) {
    throw std::invalid_argument("baseline predict: got " + std::to_string(x.size()) + " dimensions, expected " +
                                std::to_string(d));
  }
  if (kind_ == BaselineKind::kKernel) {
    std::vector<double> zx(d);
    for (std::size_t j = 0; j < d; ++j) zx[j] = (x[j] - mean_[j]) / scale_[j];
    double s = offset_;
    for (std::size_t a = 0; a < alpha_.size(); ++a) {
      double dist = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = support_[a * d + j] - zx[j];
        dist += diff * diff;
      }
      s += alpha_[a] * std::exp(-gamma_ * dist);
    }
    return s;
  }
  double s = weights_[d];
  for (std::size_t j = 0; j < d; ++j) s += weights_[j] * (x[j] - mean_[j]) / scale_[j];
  return kind_ == BaselineKind::kLogisticLink ? sigmoid(s) : s;
}

double BaselineModel::predict(std::span<const float> x) const {
  const double v = raw(x);
  return std::isfinite(v) ? std::clamp(v, 1e-3, 1.0) : 1.0;
}

std::vector<double> BaselineModel::predict(const FeatureMatrix& x) const {
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict(x.row(i));
  return out;
}

}  // namespace rankdehaze::rf
