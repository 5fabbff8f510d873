#pragma once

// Central finite differences on every network parameter.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ridehail/mlp.hpp"

namespace ridehail::oracle {

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

/// A random network of the given sizes with a positive output bias, so the
/// clipped output stays on its linear branch, plus random inputs/targets.
struct SmallNetwork {
  MLP model;
  std::vector<double> inputs;   // row-major
  std::vector<double> targets;  // scaled units
};

inline SmallNetwork random_network(std::vector<std::size_t> sizes, std::size_t rows, std::uint64_t seed) {
  SmallNetwork net;
  net.model.sizes = std::move(sizes);
  net.model.params = initialize_parameters(net.model.sizes, seed, 3.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& p : net.model.params) p += 0.3 * (u(rng) - 0.5);
  net.inputs.resize(rows * net.model.sizes.front());
  for (auto& v : net.inputs) v = u(rng);
  net.targets.resize(rows);
  for (auto& t : net.targets) t = 4.0 * u(rng);
  return net;
}

inline GradientCheck check_gradient(SmallNetwork net, double h = 1e-5) {
  std::vector<double> analytic;
  mlp_loss(net.model, net.inputs, net.targets, &analytic);
  GradientCheck out;
  out.parameters = net.model.params.size();
  for (std::size_t k = 0; k < net.model.params.size(); ++k) {
    const double keep = net.model.params[k];
    net.model.params[k] = keep + h;
    const double up = mlp_loss(net.model, net.inputs, net.targets);
    net.model.params[k] = keep - h;
    const double down = mlp_loss(net.model, net.inputs, net.targets);
    net.model.params[k] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max(std::abs(analytic[k]) + std::abs(numeric), 1e-6);
    out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic[k] - numeric) / denom);
  }
  return out;
}

}  // namespace ridehail::oracle
