#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ridehail/dataset.hpp"

namespace ridehail {

/// Serial kernels are the reference; parallel kernels must reproduce them
/// bit for bit regardless of thread count.
enum class Execution { Serial, Parallel };

struct TreeConfig {
  std::size_t min_leaf = 1;
  std::size_t min_branch = 10;
  std::optional<std::size_t> max_depth;      // root has depth 0; nullopt = unlimited
  std::optional<std::size_t> subspace_size;  // predictors tried per node; nullopt = all
  std::uint64_t seed = 0;

  /// Throws a config error unless 1 <= min_leaf < min_branch and the
  /// subspace size lies in [1, n_predictors].
  void validate(std::size_t n_predictors) const;
};

struct SplitRule {
  std::size_t attribute = 0;
  bool categorical = false;
  double threshold = 0.0;         // continuous: left iff value <= threshold
  std::vector<int> left_levels;   // categorical, sorted
  std::vector<int> right_levels;  // categorical levels seen at fit time that go right
  bool missing_left = true;       // default direction for NaN
  bool unseen_left = true;        // categorical level absent at fit time

  bool goes_left(double value) const;
  bool operator==(const SplitRule&) const = default;
};

struct TreeNode {
  std::int32_t left = -1;
  std::int32_t right = -1;
  SplitRule rule;              // internal nodes only
  double value = 0.0;          // mean training target reaching this node
  std::size_t n_samples = 0;
  std::size_t depth = 0;
  double sse_reduction = 0.0;  // internal nodes only

  bool is_leaf() const { return left < 0; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes);

  double predict(std::span<const double> row) const;
  double predict(const Dataset& data, std::size_t row) const;
  std::vector<double> predict_all(const Dataset& data, Execution exec = Execution::Parallel) const;

  /// Index of the leaf `row` lands in.
  std::size_t leaf_index(const Dataset& data, std::size_t row) const;

  std::span<const TreeNode> nodes() const { return nodes_; }
  std::size_t leaf_count() const;
  std::size_t depth() const;

  bool operator==(const RegressionTree&) const = default;

 private:
  template <typename Lookup>
  std::size_t descend(Lookup&& value_of) const;

  std::vector<TreeNode> nodes_;
};

/// Per-predictor row orderings (value ascending, ties by row, NaN last),
/// computed once per dataset and shared by every tree fitted on it.
class PresortedData {
 public:
  explicit PresortedData(const Dataset& data, Execution exec = Execution::Parallel);

  const Dataset& data() const { return *data_; }
  std::span<const std::uint32_t> order(std::size_t attribute) const { return orders_[attribute]; }
  /// Number of non-missing rows for `attribute`; they come first in `order`.
  std::size_t present(std::size_t attribute) const { return present_[attribute]; }

 private:
  const Dataset* data_;
  std::vector<std::vector<std::uint32_t>> orders_;
  std::vector<std::size_t> present_;
};

/// Greedy variance-reduction tree on all rows of `train`.
RegressionTree fit_tree(const Dataset& train, std::span<const double> targets,
                        const TreeConfig& config, Execution exec = Execution::Parallel);

/// Fits on a multiset of rows (bootstrap or subsample). `sample_rows` may
/// repeat rows; each occurrence counts as one observation. `targets` is
/// indexed by dataset row.
RegressionTree fit_tree_on_sample(const PresortedData& presorted, std::span<const double> targets,
                                  std::span<const std::size_t> sample_rows, const TreeConfig& config,
                                  Execution exec = Execution::Parallel);

}  // namespace ridehail
