#include "rankdehaze/optim.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rankdehaze::nn {

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0)) throw std::invalid_argument("initial learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "initial_lr=" << initial_lr << "\n"
      << "momentum=" << momentum << "\n"
      << "batch_size=" << batch_size << "\n"
      << "epochs=" << epochs << "\n"
      << "rng_seed=" << rng_seed << "\n";
  return out.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("train config: bad line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  TrainConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "initial_lr") c.initial_lr = std::stod(value);
    else if (key == "momentum") c.momentum = std::stod(value);
    else if (key == "batch_size") c.batch_size = std::stoi(value);
    else if (key == "epochs") c.epochs = std::stoi(value);
    else if (key == "rng_seed") c.rng_seed = std::stoull(value);
    else throw std::invalid_argument("train config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

double lr_at(std::int64_t iter, const TrainConfig& config) {
  if (iter < 0) throw std::invalid_argument("lr_at: negative iteration");
  return config.initial_lr * std::pow(1.0 + 0.0001 * static_cast<double>(iter), -0.75);
}

template <typename T>
void sgd_step(LayerParams<T>& params, const ParamGrads<T>& grads, double lr, double momentum) {
  if (grads.weights.size() != params.weights.size() || grads.bias.size() != params.bias.size()) {
    throw ShapeError("sgd_step: gradient shape does not match parameters");
  }
  if (params.weight_velocity.size() != params.weights.size() ||
      params.bias_velocity.size() != params.bias.size()) {
    params.reset_velocity();
  }
  const T mu = static_cast<T>(momentum);
  const T rate = static_cast<T>(lr);
  auto update = [&](std::vector<T>& w, std::vector<T>& v, const std::vector<T>& g) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = mu * v[i] - rate * g[i];
      w[i] += v[i];
    }
  };
  update(params.weights, params.weight_velocity, grads.weights);
  update(params.bias, params.bias_velocity, grads.bias);
}

template void sgd_step(LayerParams<float>&, const ParamGrads<float>&, double, double);
template void sgd_step(LayerParams<double>&, const ParamGrads<double>&, double, double);

}  // namespace rankdehaze::nn
