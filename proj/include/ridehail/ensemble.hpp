#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ridehail/cart.hpp"

namespace ridehail {

struct EnsembleConfig {
  std::size_t n_trees = 100;
  TreeConfig tree;                          // subspace_size is set by the fit functions
  std::optional<double> subspace_percent;  // forest only; nullopt = floor(n_p / 3)
  std::uint64_t seed = 0;
  /// Testing hook: every tree sees the training rows exactly once.
  bool identity_bootstrap = false;
};

/// Predictors tried per split for a forest: max(1, floor(delta / 100 * n_p)).
/// Throws a config error unless delta lies in (0, 100].
std::size_t subspace_size_for_percent(double delta, std::size_t n_predictors);
/// max(1, floor(n_p / 3)).
std::size_t default_forest_subspace(std::size_t n_predictors);

/// The with-replacement resample of size n drawn for a tree.
std::vector<std::size_t> bootstrap_sample(std::uint64_t seed, std::size_t n);

struct TreeEnsemble {
  std::vector<RegressionTree> trees;
  std::vector<std::uint64_t> bootstrap_seeds;
  std::size_t subspace_size = 0;  // predictors per split
  bool identity_bootstrap = false;

  /// Unweighted mean of member predictions, summed in member order.
  double predict(std::span<const double> row) const;
  double predict(const Dataset& data, std::size_t row) const;
  std::vector<double> predict_all(const Dataset& data, Execution exec = Execution::Parallel) const;

  bool operator==(const TreeEnsemble&) const = default;
};

TreeEnsemble fit_bagged(const Dataset& train, std::span<const double> targets, const EnsembleConfig& config,
                        Execution exec = Execution::Parallel);

TreeEnsemble fit_random_forest(const Dataset& train, std::span<const double> targets,
                               const EnsembleConfig& config, Execution exec = Execution::Parallel);

/// Out-of-bag RMSE over rows left out by at least one tree; nullopt when
/// every row was drawn by every tree.
std::optional<double> oob_rmse(const TreeEnsemble& ensemble, const Dataset& train,
                               std::span<const double> targets);

}  // namespace ridehail
