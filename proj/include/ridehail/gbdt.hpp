#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ridehail/cart.hpp"

namespace ridehail {

struct GBDTConfig {
  std::size_t iterations = 300;  // M
  double beta = 0.1;             // shrinkage
  double bag_fraction = 0.7;
  std::optional<std::size_t> interaction_depth;  // nullopt = number of predictors
  std::size_t min_leaf_terminal = 10;
  std::uint64_t seed = 0;

  /// Throws a config error when a value is out of range.
  void validate() const;
  /// Depth used for the base trees of a model on `n_predictors` predictors.
  std::size_t depth_for(std::size_t n_predictors) const;

  bool operator==(const GBDTConfig&) const = default;
};

struct GBDTStage {
  RegressionTree tree;
  double step = 1.0;  // line-search multiplier

  bool operator==(const GBDTStage&) const = default;
};

/// Per-iteration losses on the full training set (and validation set when
/// one was supplied). Entry m-1 is the loss after stage m.
struct GBDTHistory {
  std::vector<double> train_mse;
  std::vector<double> valid_mse;

  bool operator==(const GBDTHistory&) const = default;
};

struct GBDTModel {
  double f0 = 0.0;
  GBDTConfig config;
  Schema schema;
  std::vector<GBDTStage> stages;
  GBDTHistory history;

  /// F0 + sum over the first `at_stage` stages of beta * step * h(x);
  /// all stages by default. Throws a range error if at_stage > stages.
  double predict(const Dataset& data, std::size_t row, std::optional<std::size_t> at_stage = {}) const;
  double predict(std::span<const double> row, std::optional<std::size_t> at_stage = {}) const;
  std::vector<double> predict_all(const Dataset& data, std::optional<std::size_t> at_stage = {},
                                  Execution exec = Execution::Parallel) const;

  bool operator==(const GBDTModel&) const = default;
};

GBDTModel fit_gbdt(const Dataset& train, std::span<const double> targets, const GBDTConfig& config,
                   const Dataset* validation = nullptr, Execution exec = Execution::Parallel);

/// Appends `extra_iterations` stages drawn from the same seed stream, so the
/// result equals a fresh fit with the combined iteration count. Pass the
/// same validation set as the original fit to extend its history.
GBDTModel continue_fit(GBDTModel model, const Dataset& train, std::span<const double> targets,
                       std::size_t extra_iterations, const Dataset* validation = nullptr,
                       Execution exec = Execution::Parallel);

/// 1-based iteration with the lowest validation loss; earliest on ties.
/// Throws a state error when there is no validation history.
std::size_t early_stop_select(std::span<const double> validation_loss);

}  // namespace ridehail
