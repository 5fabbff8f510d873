#include "ridehail/ensemble.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "ridehail/error.hpp"
#include "ridehail/rng.hpp"

namespace ridehail {

std::size_t subspace_size_for_percent(double delta, std::size_t n_predictors) {
  if (!(delta > 0.0 && delta <= 100.0)) {
    throw Error(ErrorCategory::Config, "subspace percent must lie in (0, 100], got " + std::to_string(delta));
  }
  const auto k = static_cast<std::size_t>(std::floor(delta * static_cast<double>(n_predictors) / 100.0));
  return std::max<std::size_t>(1, k);
}

std::size_t default_forest_subspace(std::size_t n_predictors) {
  return std::max<std::size_t>(1, n_predictors / 3);
}

std::vector<std::size_t> bootstrap_sample(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = uniform_index(rng, n);
  return rows;
}

double TreeEnsemble::predict(std::span<const double> row) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(row);
  return sum / static_cast<double>(trees.size());
}

double TreeEnsemble::predict(const Dataset& data, std::size_t row) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(data, row);
  return sum / static_cast<double>(trees.size());
}

std::vector<double> TreeEnsemble::predict_all(const Dataset& data, Execution exec) const {
  std::vector<double> out(data.rows());
  const auto n = static_cast<std::ptrdiff_t>(data.rows());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (std::ptrdiff_t r = 0; r < n; ++r) out[r] = predict(data, static_cast<std::size_t>(r));
  return out;
}

namespace {

TreeEnsemble fit_ensemble(const Dataset& train, std::span<const double> targets, const EnsembleConfig& config,
                          std::optional<std::size_t> subspace, Execution exec) {
  if (train.empty()) throw Error(ErrorCategory::Usage, "cannot fit an ensemble on an empty dataset");
  if (targets.size() != train.rows()) {
    throw Error(ErrorCategory::Usage, "targets (" + std::to_string(targets.size()) +
                                          ") not aligned with rows (" + std::to_string(train.rows()) + ")");
  }
  if (config.n_trees < 1) throw Error(ErrorCategory::Config, "n_trees must be >= 1");
  TreeConfig base = config.tree;
  base.subspace_size = subspace;
  base.validate(train.n_predictors());

  const PresortedData presorted(train, exec);
  TreeEnsemble ens;
  ens.trees.resize(config.n_trees);
  ens.bootstrap_seeds.resize(config.n_trees);
  ens.subspace_size = subspace.value_or(train.n_predictors());
  ens.identity_bootstrap = config.identity_bootstrap;

  std::vector<std::size_t> identity;
  if (config.identity_bootstrap) {
    identity.resize(train.rows());
    std::iota(identity.begin(), identity.end(), std::size_t{0});
  }

  const auto n_trees = static_cast<std::ptrdiff_t>(config.n_trees);
#pragma omp parallel for schedule(dynamic) if (exec == Execution::Parallel)
  for (std::ptrdiff_t k = 0; k < n_trees; ++k) {
    const auto idx = static_cast<std::uint64_t>(k);
    ens.bootstrap_seeds[k] = derive_seed(config.seed, "bootstrap", idx);
    TreeConfig tc = base;
    tc.seed = derive_seed(config.seed, "tree", idx);
    if (config.identity_bootstrap) {
      ens.trees[k] = fit_tree_on_sample(presorted, targets, identity, tc, Execution::Serial);
    } else {
      const auto sample = bootstrap_sample(ens.bootstrap_seeds[k], train.rows());
      ens.trees[k] = fit_tree_on_sample(presorted, targets, sample, tc, Execution::Serial);
    }
  }
  return ens;
}

}  // namespace

TreeEnsemble fit_bagged(const Dataset& train, std::span<const double> targets, const EnsembleConfig& config,
                        Execution exec) {
  return fit_ensemble(train, targets, config, std::nullopt, exec);
}

TreeEnsemble fit_random_forest(const Dataset& train, std::span<const double> targets,
                               const EnsembleConfig& config, Execution exec) {
  const std::size_t p = train.n_predictors();
  const std::size_t k = config.subspace_percent ? subspace_size_for_percent(*config.subspace_percent, p)
                                                : default_forest_subspace(p);
  return fit_ensemble(train, targets, config, k, exec);
}

std::optional<double> oob_rmse(const TreeEnsemble& ensemble, const Dataset& train,
                               std::span<const double> targets) {
  if (ensemble.identity_bootstrap) return std::nullopt;
  const std::size_t n = train.rows();
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  std::vector<char> drawn(n);
  for (std::size_t k = 0; k < ensemble.trees.size(); ++k) {
    std::fill(drawn.begin(), drawn.end(), 0);
    for (auto r : bootstrap_sample(ensemble.bootstrap_seeds[k], n)) drawn[r] = 1;
    for (std::size_t r = 0; r < n; ++r) {
      if (drawn[r]) continue;
      sum[r] += ensemble.trees[k].predict(train, r);
      ++count[r];
    }
  }
  double sse = 0.0;
  std::size_t used = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (count[r] == 0) continue;
    const double d = sum[r] / static_cast<double>(count[r]) - targets[r];
    sse += d * d;
    ++used;
  }
  if (used == 0) return std::nullopt;
  return std::sqrt(sse / static_cast<double>(used));
}

}  // namespace ridehail
