#include <cmath>
#include <numeric>
#include <random>

#include "../oracles/cart_oracle.hpp"
#include "doctest.h"
#include "ridehail/error.hpp"
#include "support.hpp"

using namespace ridehail;

TEST_CASE("tree decisions match exhaustive split search on small nodes") {
  std::mt19937_64 rng(20160101);
  int checked = 0;
  for (int c = 0; c < 400; ++c) {
    test::TableShape shape;
    shape.rows = 2 + rng() % 7;
    shape.categorical = rng() % 3;
    shape.continuous = 1 + rng() % 2;
    shape.levels = 2 + static_cast<int>(rng() % 3);
    shape.integer_values = rng() % 2;
    shape.missing_rate = rng() % 4 == 0 ? 0.2 : 0.0;
    const auto d = test::random_table(rng, shape);
    TreeConfig cfg;
    cfg.min_leaf = 1 + rng() % 2;
    cfg.min_branch = cfg.min_leaf + 1 + rng() % 3;
    if (rng() % 4 == 0) cfg.max_depth = 1 + rng() % 2;
    const auto tree = fit_tree(d, d.target(), cfg, Execution::Serial);
    INFO("case " << c);
    CHECK(oracle::check_tree(tree, d, d.target(), cfg) == "");
    ++checked;
  }
  CHECK(checked == 400);
}

TEST_CASE("leaf values are node means and training rows land in them") {
  std::mt19937_64 rng(5);
  const auto d = test::random_table(rng, {.rows = 200, .categorical = 1, .continuous = 3});
  TreeConfig cfg;
  cfg.min_leaf = 3;
  cfg.min_branch = 8;
  const auto tree = fit_tree(d, d.target(), cfg);
  std::vector<double> sum(tree.nodes().size(), 0.0);
  std::vector<std::size_t> count(tree.nodes().size(), 0);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    const auto leaf = tree.leaf_index(d, r);
    sum[leaf] += d.target()[r];
    ++count[leaf];
  }
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    const auto& node = tree.nodes()[i];
    if (!node.is_leaf()) continue;
    CHECK(count[i] == node.n_samples);
    CHECK(count[i] >= cfg.min_leaf);
    CHECK(node.value == doctest::Approx(sum[i] / count[i]).epsilon(1e-12));
  }
}

TEST_CASE("fully grown tree interpolates distinct rows") {
  std::mt19937_64 rng(6);
  const auto d = test::random_table(rng, {.rows = 60, .categorical = 0, .continuous = 2});
  TreeConfig cfg;
  cfg.min_leaf = 1;
  cfg.min_branch = 2;
  const auto tree = fit_tree(d, d.target(), cfg);
  for (std::size_t r = 0; r < d.rows(); ++r) CHECK(tree.predict(d, r) == d.target()[r]);
}

TEST_CASE("depth limit and stumps") {
  const auto d = test::line_table({0, 1, 2, 3, 4, 5, 6, 7}, {0, 0, 0, 0, 10, 10, 10, 11});
  TreeConfig cfg;
  cfg.min_branch = 2;
  cfg.max_depth = 1;
  const auto stump = fit_tree(d, d.target(), cfg);
  REQUIRE(stump.nodes().size() == 3);
  CHECK(stump.depth() == 1);
  CHECK(stump.nodes()[0].rule.threshold == 3.5);
  CHECK(stump.predict(std::vector<double>{2.0}) == 0.0);
  CHECK(stump.predict(std::vector<double>{9.0}) == 10.25);
}

TEST_CASE("serial and parallel fits are identical") {
  std::mt19937_64 rng(8);
  const auto d = test::random_table(rng, {.rows = 6000, .categorical = 2, .continuous = 4, .levels = 9,
                                          .missing_rate = 0.02});
  TreeConfig cfg;
  cfg.min_leaf = 2;
  cfg.min_branch = 5;
  cfg.subspace_size = 3;
  cfg.seed = 77;
  const auto a = fit_tree(d, d.target(), cfg, Execution::Serial);
  const auto b = fit_tree(d, d.target(), cfg, Execution::Parallel);
  CHECK(a == b);
  CHECK(a.predict_all(d, Execution::Serial) == b.predict_all(d, Execution::Parallel));
}

TEST_CASE("missing values follow the learned default direction") {
  std::vector<double> x = {0, 1, 2, 3, NAN, NAN, 10, 11};
  std::vector<double> y = {0, 0, 0, 0, 9, 9, 9, 9};
  const auto d = test::line_table(x, y);
  TreeConfig cfg;
  cfg.min_branch = 2;
  const auto tree = fit_tree(d, d.target(), cfg);
  const auto& root = tree.nodes()[0];
  REQUIRE_FALSE(root.is_leaf());
  CHECK_FALSE(root.rule.missing_left);
  CHECK(tree.predict(std::vector<double>{NAN}) == 9.0);
  CHECK(tree.predict(std::vector<double>{1.5}) == 0.0);
}

TEST_CASE("categorical splits partition levels and send unseen levels to the larger child") {
  Schema s({Column::categorical("c", "", 1, 5)}, Column::continuous("y", "", -1e9, 1e9));
  const Dataset d(s, {{1, 1, 2, 2, 3, 3, 4}}, {5, 5, 0, 0, 5, 5, 0});
  TreeConfig cfg;
  cfg.min_branch = 2;
  cfg.max_depth = 1;
  const auto tree = fit_tree(d, d.target(), cfg);
  const auto& rule = tree.nodes()[0].rule;
  CHECK(rule.categorical);
  CHECK(rule.left_levels == std::vector<int>{1, 3});
  CHECK(rule.right_levels == std::vector<int>{2, 4});
  CHECK(rule.unseen_left);
  CHECK(tree.predict(std::vector<double>{5}) == 5.0);
}

TEST_CASE("the best admissible level partition need not follow the mean order") {
  // Level means 0.5 (2), 1.25 (1), 6.5 (4): every mean-ordered cut leaves a
  // single row on one side, so only {1} | {2, 4} satisfies min_leaf = 2.
  Schema s({Column::categorical("c", "", 1, 4)}, Column::continuous("y", "", -1e9, 1e9));
  const Dataset d(s, {{1, 1, 2, 4}}, {0.5, 2.0, 0.5, 6.5});
  TreeConfig cfg;
  cfg.min_leaf = 2;
  cfg.min_branch = 4;
  const auto tree = fit_tree(d, d.target(), cfg);
  REQUIRE(tree.nodes().size() == 3);
  CHECK(tree.nodes()[0].rule.left_levels == std::vector<int>{1});
  CHECK(tree.nodes()[0].rule.right_levels == std::vector<int>{2, 4});
}

TEST_CASE("many-level attributes use the mean-ordered scan, exact without a leaf minimum") {
  std::mt19937_64 rng(77);
  for (int c = 0; c < 40; ++c) {
    auto d = test::random_table(rng, {.rows = 40, .categorical = 1, .continuous = 0, .levels = 14});
    TreeConfig cfg;
    cfg.min_leaf = 1;
    cfg.min_branch = 2;
    cfg.max_depth = 1;
    const auto tree = fit_tree(d, d.target(), cfg);
    std::vector<std::size_t> rows(d.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto best = oracle::exhaustive_split(d, d.target(), rows, cfg, 0);
    REQUIRE(best.has_value());
    CHECK(tree.nodes()[0].sse_reduction == doctest::Approx(best->gain).epsilon(1e-9));
  }
}

TEST_CASE("tree config validation") {
  TreeConfig cfg;
  CHECK_NOTHROW(cfg.validate(5));
  cfg.min_leaf = 0;
  CHECK_THROWS_AS(cfg.validate(5), Error);
  cfg.min_leaf = 5;
  cfg.min_branch = 5;
  CHECK_THROWS_AS(cfg.validate(5), Error);
  cfg = TreeConfig{};
  cfg.subspace_size = 6;
  CHECK_THROWS_AS(cfg.validate(5), Error);
}

TEST_CASE("sample multiplicity counts as observations") {
  const auto d = test::line_table({0, 1, 2}, {0, 3, 6});
  PresortedData pre(d);
  TreeConfig cfg;
  cfg.min_branch = 2;
  cfg.max_depth = 0;
  const std::vector<std::size_t> rows = {0, 0, 0, 2};
  const auto tree = fit_tree_on_sample(pre, d.target(), rows, cfg);
  CHECK(tree.nodes()[0].value == 1.5);
  CHECK(tree.nodes()[0].n_samples == 4);
}
