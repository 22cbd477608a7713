#include "rankdehaze/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rankdehaze/rng.hpp"

namespace rankdehaze::nn {

namespace {

// Everything that decides which linear piece the network is on.
bool same_pieces(const Network<double>& net, const Trace<double>& a, const Trace<double>& b) {
  if (a.routes != b.routes) return false;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    if (!std::holds_alternative<ReluLayer>(net.layers()[i])) continue;
    const auto& x = a.activations[i];
    const auto& y = b.activations[i];
    for (std::size_t k = 0; k < x.size(); ++k) {
      if ((x[k] > 0.0) != (y[k] > 0.0)) return false;
    }
  }
  return true;
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(const Network<double>& network, const Tensor<double>& input,
                           const ScalarLoss& loss, const GradCheckOptions& options) {
  Network<double> net = network;
  Trace<double> base;
  net.forward(input, base);
  const auto base_loss = loss(base.activations.back().values());
  const Gradients<double> analytic = net.backward(base, base_loss.grad);

  GradCheckReport report;
  Rng rng(options.seed);
  Trace<double> probe = base;

  // Central difference of the loss for one scalar `slot`, re-running the
  // network from layer `first`. Returns false at a kink.
  auto numeric = [&](double& slot, std::size_t first, double& out) {
    const double original = slot;
    for (double h = options.step; h >= 1e-7 * 0.999; h /= 10.0) {
      auto eval = [&](double value) {
        slot = value;
        net.forward_from(first, probe);
        const double l = loss(probe.activations.back().values()).loss;
        return std::pair{l, same_pieces(net, base, probe)};
      };
      const auto [plus, plus_ok] = eval(original + h);
      const auto [minus, minus_ok] = eval(original - h);
      slot = original;
      if (plus_ok && minus_ok) {
        out = (plus - minus) / (2.0 * h);
        return true;
      }
    }
    return false;
  };

  auto record = [&](const std::string& blob, std::size_t index, double a, double n) {
    const double denom = std::max({std::abs(a), std::abs(n), options.abs_floor});
    const double rel = std::abs(a - n) / denom;
    if (report.checked++ == 0 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_blob = blob;
      report.worst_index = index;
      report.worst_analytic = a;
      report.worst_numeric = n;
    }
  };

  for (std::size_t layer = 0; layer < net.depth(); ++layer) {
    LayerParams<double>* p = net.params(layer);
    if (!p) continue;
    const std::string name = "layer" + std::to_string(layer) + "/" +
                             to_string(kind_of(net.layers()[layer]));
    struct Blob {
      std::vector<double>* values;
      const std::vector<double>* grads;
      const char* suffix;
    };
    for (const Blob& blob : {Blob{&p->weights, &analytic.layers[layer].weights, ".weights"},
                             Blob{&p->bias, &analytic.layers[layer].bias, ".bias"}}) {
      for (std::size_t k : pick_coords(blob.values->size(), options.max_coords_per_blob, rng)) {
        probe = base;
        double n = 0.0;
        if (!numeric((*blob.values)[k], layer, n)) {
          ++report.skipped_at_kinks;
          continue;
        }
        record(name + blob.suffix, k, (*blob.grads)[k], n);
      }
    }
  }

  if (options.include_input) {
    for (std::size_t k : pick_coords(input.size(), options.max_coords_per_blob, rng)) {
      probe = base;
      double n = 0.0;
      if (!numeric(probe.activations[0][k], 0, n)) {
        ++report.skipped_at_kinks;
        continue;
      }
      record("input", k, analytic.input[k], n);
    }
  }

  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

GradCheckReport grad_check(const Network<double>& network, const Tensor<double>& input,
                           int target, const GradCheckOptions& options) {
  return grad_check(
      network, input,
      [target](std::span<const double> logits) { return softmax_xent(logits, target); }, options);
}

}  // namespace rankdehaze::nn
