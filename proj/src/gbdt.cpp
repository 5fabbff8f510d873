#include "ridehail/gbdt.hpp"

#include <cmath>
#include <string>

#include "ridehail/error.hpp"
#include "ridehail/rng.hpp"

namespace ridehail {

void GBDTConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCategory::Config, "gbdt iterations must be >= 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorCategory::Config, "beta must lie in (0, 1]");
  if (!(bag_fraction > 0.0 && bag_fraction <= 1.0)) {
    throw Error(ErrorCategory::Config, "bag_fraction must lie in (0, 1]");
  }
  if (interaction_depth && *interaction_depth < 1) {
    throw Error(ErrorCategory::Config, "interaction_depth must be >= 1");
  }
  if (min_leaf_terminal < 1) throw Error(ErrorCategory::Config, "min_leaf_terminal must be >= 1");
}

std::size_t GBDTConfig::depth_for(std::size_t n_predictors) const {
  return interaction_depth.value_or(n_predictors);
}

namespace {

inline void apply_stage(double& f, double beta, double step, double h) { f += beta * step * h; }

std::size_t resolve_stage(std::optional<std::size_t> at_stage, std::size_t n) {
  const std::size_t m = at_stage.value_or(n);
  if (m > n) {
    throw Error(ErrorCategory::Range,
                "at_stage " + std::to_string(m) + " exceeds the " + std::to_string(n) + " fitted stages");
  }
  return m;
}

double mse(std::span<const double> f, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - f[i];
    s += d * d;
  }
  return s / static_cast<double>(y.size());
}

void check_aligned(const Dataset& train, std::span<const double> targets) {
  if (train.empty()) throw Error(ErrorCategory::Usage, "cannot fit boosting on an empty dataset");
  if (targets.size() != train.rows()) {
    throw Error(ErrorCategory::Usage, "targets (" + std::to_string(targets.size()) +
                                          ") not aligned with rows (" + std::to_string(train.rows()) + ")");
  }
}

void add_stages(GBDTModel& model, const Dataset& train, std::span<const double> targets, std::size_t first,
                std::size_t count, const Dataset* validation, Execution exec) {
  const std::size_t n = train.rows();
  const auto& cfg = model.config;
  std::vector<double> f = model.predict_all(train, std::nullopt, exec);
  std::vector<double> fv;
  if (validation) fv = model.predict_all(*validation, std::nullopt, exec);

  const PresortedData presorted(train, exec);
  TreeConfig tc;
  tc.min_leaf = cfg.min_leaf_terminal;
  tc.min_branch = 2 * cfg.min_leaf_terminal;
  tc.max_depth = cfg.depth_for(train.n_predictors());
  const auto bag = static_cast<std::size_t>(std::ceil(cfg.bag_fraction * static_cast<double>(n)));
  const std::size_t bag_size = std::clamp<std::size_t>(bag, 1, n);

  std::vector<double> residual(n);
  std::vector<std::size_t> all_rows;
  if (bag_size == n) {
    all_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) all_rows[i] = i;
  }
  for (std::size_t m = first; m < first + count; ++m) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = targets[i] - f[i];
    tc.seed = derive_seed(cfg.seed, "gbdt-tree", m);
    RegressionTree tree;
    if (bag_size == n) {
      tree = fit_tree_on_sample(presorted, residual, all_rows, tc, exec);
    } else {
      Rng rng = make_rng(cfg.seed, "gbdt-bag", m);
      const auto rows = sample_without_replacement(rng, n, bag_size);
      tree = fit_tree_on_sample(presorted, residual, rows, tc, exec);
    }
    GBDTStage stage{std::move(tree), 1.0};
    const auto h = stage.tree.predict_all(train, exec);
    for (std::size_t i = 0; i < n; ++i) apply_stage(f[i], cfg.beta, stage.step, h[i]);
    model.history.train_mse.push_back(mse(f, targets));
    if (validation) {
      const auto hv = stage.tree.predict_all(*validation, exec);
      for (std::size_t i = 0; i < hv.size(); ++i) apply_stage(fv[i], cfg.beta, stage.step, hv[i]);
      model.history.valid_mse.push_back(mse(fv, validation->target()));
    }
    model.stages.push_back(std::move(stage));
  }
}

}  // namespace

double GBDTModel::predict(const Dataset& data, std::size_t row, std::optional<std::size_t> at_stage) const {
  const std::size_t m = resolve_stage(at_stage, stages.size());
  double f = f0;
  for (std::size_t j = 0; j < m; ++j) apply_stage(f, config.beta, stages[j].step, stages[j].tree.predict(data, row));
  return f;
}

double GBDTModel::predict(std::span<const double> row, std::optional<std::size_t> at_stage) const {
  const std::size_t m = resolve_stage(at_stage, stages.size());
  double f = f0;
  for (std::size_t j = 0; j < m; ++j) apply_stage(f, config.beta, stages[j].step, stages[j].tree.predict(row));
  return f;
}

std::vector<double> GBDTModel::predict_all(const Dataset& data, std::optional<std::size_t> at_stage,
                                           Execution exec) const {
  const std::size_t m = resolve_stage(at_stage, stages.size());
  std::vector<double> out(data.rows());
  const auto n = static_cast<std::ptrdiff_t>(data.rows());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (std::ptrdiff_t r = 0; r < n; ++r) out[r] = predict(data, static_cast<std::size_t>(r), m);
  return out;
}

GBDTModel fit_gbdt(const Dataset& train, std::span<const double> targets, const GBDTConfig& config,
                   const Dataset* validation, Execution exec) {
  config.validate();
  check_aligned(train, targets);
  if (validation && !(validation->schema() == train.schema())) {
    throw Error(ErrorCategory::Schema, "validation schema differs from training schema");
  }
  GBDTModel model;
  model.config = config;
  model.schema = train.schema();
  double sum = 0.0;
  for (double y : targets) sum += y;
  model.f0 = sum / static_cast<double>(targets.size());
  add_stages(model, train, targets, 0, config.iterations, validation, exec);
  return model;
}

GBDTModel continue_fit(GBDTModel model, const Dataset& train, std::span<const double> targets,
                       std::size_t extra_iterations, const Dataset* validation, Execution exec) {
  check_aligned(train, targets);
  if (!(train.schema() == model.schema)) {
    throw Error(ErrorCategory::Schema, "training schema differs from the schema the model was fitted on");
  }
  if (validation && !(validation->schema() == model.schema)) {
    throw Error(ErrorCategory::Schema, "validation schema differs from the model schema");
  }
  if (extra_iterations == 0) return model;
  if (!validation) model.history.valid_mse.clear();
  const std::size_t first = model.stages.size();
  add_stages(model, train, targets, first, extra_iterations, validation, exec);
  model.config.iterations = model.stages.size();
  return model;
}

std::size_t early_stop_select(std::span<const double> validation_loss) {
  if (validation_loss.empty()) throw Error(ErrorCategory::State, "no validation history to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < validation_loss.size(); ++i) {
    if (validation_loss[i] < validation_loss[best]) best = i;
  }
  return best + 1;
}

}  // namespace ridehail
