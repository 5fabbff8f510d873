#include "ridehail/cart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ridehail/error.hpp"
#include "ridehail/rng.hpp"

namespace ridehail {

namespace {

// Two candidate splits whose variance reductions differ by less than this
// fraction of the node SSE are treated as tied; ties go to the lowest
// attribute index, then the lowest threshold (or categorical partition).
constexpr double kTieTolerance = 1e-10;

// Categorical attributes with at most this many levels in a node get an
// exhaustive search over level subsets; more levels use the mean-ordered
// prefix scan, which is exact only without a minimum leaf size.
constexpr std::size_t kExactLevelLimit = 10;

// Nodes smaller than this are searched serially even in parallel mode.
constexpr std::size_t kParallelNodeSize = 4096;

struct Candidate {
  double gain = 0.0;
  std::uint32_t position = 0;  // continuous: last present entry going left; categorical: prefix length or mask
  std::uint32_t n_left = 0;
  bool missing_left = true;
};

struct LevelGroup {
  int level = 0;
  std::uint32_t count = 0;
  double sum = 0.0;
};

struct AttributeScan {
  std::vector<Candidate> candidates;  // ascending threshold / prefix order
  std::vector<LevelGroup> groups;     // categorical only: level order if exact, else mean order
  bool exact = false;                 // candidates are level masks over `groups`
  double max_gain = -std::numeric_limits<double>::infinity();
  std::size_t n_present = 0;
};

bool is_missing(double v) { return std::isnan(v); }

}  // namespace

void TreeConfig::validate(std::size_t n_predictors) const {
  if (min_leaf < 1) throw Error(ErrorCategory::Config, "min_leaf must be >= 1");
  if (min_branch < 2 || min_leaf >= min_branch) {
    throw Error(ErrorCategory::Config, "need 1 <= min_leaf < min_branch and min_branch >= 2");
  }
  if (subspace_size && (*subspace_size < 1 || *subspace_size > n_predictors)) {
    throw Error(ErrorCategory::Config, "subspace size must lie in [1, " + std::to_string(n_predictors) + "]");
  }
  if (n_predictors == 0) throw Error(ErrorCategory::Config, "no predictors to split on");
}

bool SplitRule::goes_left(double value) const {
  if (is_missing(value)) return missing_left;
  if (!categorical) return value <= threshold;
  const int level = static_cast<int>(value);
  if (std::binary_search(left_levels.begin(), left_levels.end(), level)) return true;
  if (std::binary_search(right_levels.begin(), right_levels.end(), level)) return false;
  return unseen_left;
}

// ---------------------------------------------------------------------------
// RegressionTree

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw Error(ErrorCategory::State, "a tree needs at least one node");
  const auto n = static_cast<std::int32_t>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n) {
      throw Error(ErrorCategory::State, "tree node has an out-of-range child index");
    }
  }
}

template <typename Lookup>
std::size_t RegressionTree::descend(Lookup&& value_of) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& node = nodes_[i];
    i = static_cast<std::size_t>(node.rule.goes_left(value_of(node.rule.attribute)) ? node.left
                                                                                      : node.right);
  }
  return i;
}

double RegressionTree::predict(std::span<const double> row) const {
  return nodes_[descend([&](std::size_t a) { return row[a]; })].value;
}

double RegressionTree::predict(const Dataset& data, std::size_t row) const {
  return nodes_[leaf_index(data, row)].value;
}

std::size_t RegressionTree::leaf_index(const Dataset& data, std::size_t row) const {
  return descend([&](std::size_t a) { return data.at(row, a); });
}

std::vector<double> RegressionTree::predict_all(const Dataset& data, Execution exec) const {
  std::vector<double> out(data.rows());
  const auto n = static_cast<std::ptrdiff_t>(data.rows());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (std::ptrdiff_t r = 0; r < n; ++r) out[r] = predict(data, static_cast<std::size_t>(r));
  return out;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t RegressionTree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

// ---------------------------------------------------------------------------
// PresortedData

PresortedData::PresortedData(const Dataset& data, Execution exec)
    : data_(&data), orders_(data.n_predictors()), present_(data.n_predictors()) {
  if (data.rows() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCategory::Config, "dataset too large for 32-bit row indices");
  }
  const auto p = static_cast<std::ptrdiff_t>(data.n_predictors());
#pragma omp parallel for schedule(dynamic) if (exec == Execution::Parallel)
  for (std::ptrdiff_t a = 0; a < p; ++a) {
    const auto column = data.column(static_cast<std::size_t>(a));
    auto& order = orders_[a];
    order.resize(data.rows());
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
      const double vx = column[x], vy = column[y];
      const bool mx = is_missing(vx), my = is_missing(vy);
      if (mx != my) return my;  // present before missing
      if (!mx && vx != vy) return vx < vy;
      return x < y;
    });
    present_[a] = static_cast<std::size_t>(
        std::count_if(column.begin(), column.end(), [](double v) { return !is_missing(v); }));
  }
}

// ---------------------------------------------------------------------------
// Builder

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const PresortedData& pre, std::span<const double> targets,
              std::span<const std::size_t> sample_rows, const TreeConfig& cfg, Execution exec)
      : data_(pre.data()), targets_(targets), cfg_(cfg), exec_(exec), p_(data_.n_predictors()),
        rng_(cfg.seed) {
    cfg_.validate(p_);
    if (targets_.size() != data_.rows()) {
      throw Error(ErrorCategory::Usage, "targets (" + std::to_string(targets_.size()) +
                                            ") not aligned with rows (" + std::to_string(data_.rows()) + ")");
    }
    if (sample_rows.empty()) throw Error(ErrorCategory::Usage, "cannot fit a tree on zero rows");

    // Entries are the sample occurrences ordered by row; occurrences of one
    // row are contiguous.
    std::vector<std::uint32_t> count(data_.rows(), 0);
    for (auto r : sample_rows) {
      if (r >= data_.rows()) throw Error(ErrorCategory::Range, "sample row out of range");
      ++count[r];
    }
    std::vector<std::uint32_t> first(data_.rows(), 0);
    std::uint32_t next = 0;
    for (std::size_t r = 0; r < data_.rows(); ++r) {
      first[r] = next;
      next += count[r];
    }
    n_entries_ = next;
    entry_row_.resize(n_entries_);
    for (std::size_t r = 0; r < data_.rows(); ++r) {
      for (std::uint32_t c = 0; c < count[r]; ++c) entry_row_[first[r] + c] = static_cast<std::uint32_t>(r);
    }
    members_.resize(n_entries_);
    std::iota(members_.begin(), members_.end(), std::uint32_t{0});

    order_.resize(p_);
    const auto p = static_cast<std::ptrdiff_t>(p_);
#pragma omp parallel for schedule(dynamic) if (parallel(n_entries_))
    for (std::ptrdiff_t a = 0; a < p; ++a) {
      auto& ord = order_[a];
      ord.reserve(n_entries_);
      for (auto r : pre.order(static_cast<std::size_t>(a))) {
        for (std::uint32_t c = 0; c < count[r]; ++c) ord.push_back(first[r] + c);
      }
    }
    goes_left_.resize(n_entries_);
    scans_.resize(p_);
  }

  RegressionTree build() {
    struct Work {
      std::size_t node, begin, end, depth;
    };
    nodes_.emplace_back();
    std::vector<Work> stack{{0, 0, n_entries_, 0}};
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      auto children = process(w.node, w.begin, w.end, w.depth);
      if (children) {
        // Left child is processed first so RNG draws follow DFS order.
        stack.push_back(Work{children->right, children->split, w.end, w.depth + 1});
        stack.push_back(Work{children->left, w.begin, children->split, w.depth + 1});
      }
    }
    return RegressionTree(std::move(nodes_));
  }

 private:
  struct Children {
    std::size_t left, right, split;
  };

  bool parallel(std::size_t n) const { return exec_ == Execution::Parallel && n >= kParallelNodeSize; }

  double y(std::uint32_t entry) const { return targets_[entry_row_[entry]]; }
  double x(std::size_t attribute, std::uint32_t entry) const {
    return data_.at(entry_row_[entry], attribute);
  }

  std::optional<Children> process(std::size_t node_id, std::size_t begin, std::size_t end,
                                  std::size_t depth) {
    const std::size_t n = end - begin;
    double sum = 0.0;
    bool pure = true;
    const double first_y = y(members_[begin]);
    for (std::size_t i = begin; i < end; ++i) {
      const double v = y(members_[i]);
      sum += v;
      pure = pure && v == first_y;
    }
    const double mean = sum / static_cast<double>(n);
    {
      TreeNode& node = nodes_[node_id];
      node.value = pure ? first_y : mean;
      node.n_samples = n;
      node.depth = depth;
    }
    if (pure || n < cfg_.min_branch || n < 2 * cfg_.min_leaf) return std::nullopt;
    if (cfg_.max_depth && depth >= *cfg_.max_depth) return std::nullopt;

    double sse = 0.0;
    double centered_total = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = y(members_[i]) - mean;
      sse += d * d;
      centered_total += d;
    }

    std::vector<std::size_t> attributes;
    if (cfg_.subspace_size && *cfg_.subspace_size < p_) {
      attributes = sample_without_replacement(rng_, p_, *cfg_.subspace_size);
    } else {
      attributes.resize(p_);
      std::iota(attributes.begin(), attributes.end(), std::size_t{0});
    }

    const auto n_attr = static_cast<std::ptrdiff_t>(attributes.size());
#pragma omp parallel for schedule(dynamic) if (parallel(n))
    for (std::ptrdiff_t k = 0; k < n_attr; ++k) {
      scan(attributes[k], begin, end, mean, centered_total, scans_[attributes[k]]);
    }

    double best = -std::numeric_limits<double>::infinity();
    for (auto a : attributes) best = std::max(best, scans_[a].max_gain);
    const double tol = kTieTolerance * sse;
    if (!(best > tol)) return std::nullopt;

    const double cutoff = best - tol;
    std::size_t chosen_attr = 0;
    const Candidate* chosen = nullptr;
    for (auto a : attributes) {
      for (const auto& c : scans_[a].candidates) {
        if (c.gain >= cutoff) {
          chosen = &c;
          break;
        }
      }
      if (chosen) {
        chosen_attr = a;
        break;
      }
    }

    SplitRule rule = make_rule(chosen_attr, *chosen, begin);
    const std::size_t n_left = chosen->n_left;
    const double gain = chosen->gain;

    // Route every entry, then stable-partition all per-attribute orders.
    std::size_t routed_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto e = members_[i];
      const bool left = rule.goes_left(x(chosen_attr, e));
      goes_left_[e] = left;
      routed_left += left;
    }
    if (routed_left != n_left) throw Error(ErrorCategory::State, "split routing disagrees with scan");
    if (rule.categorical) rule.unseen_left = n_left >= n - n_left;

    partition(members_, begin, end);
    const auto p = static_cast<std::ptrdiff_t>(p_);
#pragma omp parallel for schedule(static) if (parallel(n))
    for (std::ptrdiff_t a = 0; a < p; ++a) partition(order_[a], begin, end);

    const std::size_t left_id = nodes_.size();
    nodes_.emplace_back();
    const std::size_t right_id = nodes_.size();
    nodes_.emplace_back();
    TreeNode& node = nodes_[node_id];
    node.rule = std::move(rule);
    node.sse_reduction = gain;
    node.left = static_cast<std::int32_t>(left_id);
    node.right = static_cast<std::int32_t>(right_id);
    return Children{left_id, right_id, begin + n_left};
  }

  void partition(std::vector<std::uint32_t>& v, std::size_t begin, std::size_t end) const {
    thread_local std::vector<std::uint32_t> right;
    right.clear();
    std::size_t out = begin;
    for (std::size_t i = begin; i < end; ++i) {
      const auto e = v[i];
      if (goes_left_[e]) {
        v[out++] = e;
      } else {
        right.push_back(e);
      }
    }
    std::copy(right.begin(), right.end(), v.begin() + static_cast<std::ptrdiff_t>(out));
  }

  // Evaluates both default directions for missing values and keeps the
  // better admissible one (ties: missing goes left).
  void consider(AttributeScan& scan, std::uint32_t position, std::size_t n_left_present, double s_left_present,
                std::size_t n, double total, std::size_t n_missing, double s_missing) const {
    auto gain_of = [&](std::size_t nl, double sl) {
      const std::size_t nr = n - nl;
      if (nl < cfg_.min_leaf || nr < cfg_.min_leaf) return -std::numeric_limits<double>::infinity();
      const double sr = total - sl;
      return sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) -
             total * total / static_cast<double>(n);
    };
    Candidate c;
    c.position = position;
    if (n_missing == 0) {
      c.gain = gain_of(n_left_present, s_left_present);
      c.n_left = static_cast<std::uint32_t>(n_left_present);
      c.missing_left = n_left_present >= n - n_left_present;
    } else {
      const double g_left = gain_of(n_left_present + n_missing, s_left_present + s_missing);
      const double g_right = gain_of(n_left_present, s_left_present);
      if (g_left >= g_right) {
        c.gain = g_left;
        c.n_left = static_cast<std::uint32_t>(n_left_present + n_missing);
        c.missing_left = true;
      } else {
        c.gain = g_right;
        c.n_left = static_cast<std::uint32_t>(n_left_present);
        c.missing_left = false;
      }
    }
    if (!std::isfinite(c.gain)) return;
    scan.max_gain = std::max(scan.max_gain, c.gain);
    scan.candidates.push_back(c);
  }

  void scan(std::size_t a, std::size_t begin, std::size_t end, double mean, double total,
            AttributeScan& out) const {
    out.candidates.clear();
    out.groups.clear();
    out.exact = false;
    out.max_gain = -std::numeric_limits<double>::infinity();
    const auto& ord = order_[a];
    const std::size_t n = end - begin;

    std::size_t n_present = 0;
    while (n_present < n && !is_missing(x(a, ord[begin + n_present]))) ++n_present;
    out.n_present = n_present;
    const std::size_t n_missing = n - n_present;
    double s_missing = 0.0;
    for (std::size_t i = begin + n_present; i < end; ++i) s_missing += y(ord[i]) - mean;

    if (data_.schema().predictor(a).is_categorical()) {
      for (std::size_t i = begin; i < begin + n_present; ++i) {
        const auto e = ord[i];
        const int level = static_cast<int>(x(a, e));
        if (out.groups.empty() || out.groups.back().level != level) out.groups.push_back({level, 0, 0.0});
        out.groups.back().count += 1;
        out.groups.back().sum += y(e) - mean;
      }
      const std::size_t L = out.groups.size();
      if (L < 2) return;
      if (L <= kExactLevelLimit) {
        // Masks with the last level on the right, so each partition appears once.
        out.exact = true;
        for (std::uint32_t mask = 1; mask < (1u << (L - 1)); ++mask) {
          std::size_t nl = 0;
          double sl = 0.0;
          for (std::size_t k = 0; k < L; ++k) {
            if ((mask >> k) & 1u) {
              nl += out.groups[k].count;
              sl += out.groups[k].sum;
            }
          }
          consider(out, mask, nl, sl, n, total, n_missing, s_missing);
        }
        return;
      }
      std::stable_sort(out.groups.begin(), out.groups.end(), [](const LevelGroup& l, const LevelGroup& r) {
        return l.sum / l.count < r.sum / r.count;
      });
      std::size_t nl = 0;
      double sl = 0.0;
      for (std::size_t k = 1; k < out.groups.size(); ++k) {
        nl += out.groups[k - 1].count;
        sl += out.groups[k - 1].sum;
        consider(out, static_cast<std::uint32_t>(k), nl, sl, n, total, n_missing, s_missing);
      }
      return;
    }

    double sl = 0.0;
    for (std::size_t i = 0; i + 1 < n_present; ++i) {
      const auto e = ord[begin + i];
      sl += y(e) - mean;
      if (x(a, e) == x(a, ord[begin + i + 1])) continue;
      consider(out, static_cast<std::uint32_t>(i), i + 1, sl, n, total, n_missing, s_missing);
    }
  }

  SplitRule make_rule(std::size_t a, const Candidate& c, std::size_t begin) const {
    SplitRule rule;
    rule.attribute = a;
    rule.missing_left = c.missing_left;
    const auto& scan = scans_[a];
    if (data_.schema().predictor(a).is_categorical()) {
      rule.categorical = true;
      for (std::size_t k = 0; k < scan.groups.size(); ++k) {
        const bool left = scan.exact ? ((c.position >> k) & 1u) != 0 : k < c.position;
        (left ? rule.left_levels : rule.right_levels).push_back(scan.groups[k].level);
      }
      std::sort(rule.left_levels.begin(), rule.left_levels.end());
      std::sort(rule.right_levels.begin(), rule.right_levels.end());
    } else {
      const auto& ord = order_[a];
      const double lo = x(a, ord[begin + c.position]);
      const double hi = x(a, ord[begin + c.position + 1]);
      double t = lo + (hi - lo) / 2.0;
      if (!(t >= lo && t < hi)) t = lo;
      rule.threshold = t;
    }
    return rule;
  }

  const Dataset& data_;
  std::span<const double> targets_;
  const TreeConfig& cfg_;
  Execution exec_;
  std::size_t p_;
  Rng rng_;
  std::size_t n_entries_ = 0;
  std::vector<std::uint32_t> entry_row_;
  std::vector<std::uint32_t> members_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<AttributeScan> scans_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RegressionTree fit_tree_on_sample(const PresortedData& presorted, std::span<const double> targets,
                                  std::span<const std::size_t> sample_rows, const TreeConfig& config,
                                  Execution exec) {
  return TreeBuilder(presorted, targets, sample_rows, config, exec).build();
}

RegressionTree fit_tree(const Dataset& train, std::span<const double> targets, const TreeConfig& config,
                        Execution exec) {
  if (train.empty()) throw Error(ErrorCategory::Usage, "cannot fit a tree on an empty dataset");
  if (targets.size() != train.rows()) {
    throw Error(ErrorCategory::Usage, "targets (" + std::to_string(targets.size()) +
                                          ") not aligned with rows (" + std::to_string(train.rows()) + ")");
  }
  PresortedData pre(train, exec);
  std::vector<std::size_t> rows(train.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_tree_on_sample(pre, targets, rows, config, exec);
}

}  // namespace ridehail
