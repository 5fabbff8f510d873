#include <cmath>
#include <random>

#include "doctest.h"
#include "ridehail/ensemble.hpp"
#include "ridehail/error.hpp"
#include "ridehail/eval.hpp"
#include "ridehail/slots.hpp"
#include "ridehail/synthgen.hpp"
#include "support.hpp"

using namespace ridehail;

namespace {

Dataset forest_table(std::uint64_t seed, std::size_t rows = 300) {
  std::mt19937_64 rng(seed);
  return test::random_table(rng, {.rows = rows, .categorical = 2, .continuous = 4, .levels = 6});
}

}  // namespace

TEST_CASE("subspace size rule") {
  CHECK(default_forest_subspace(19) == 6);
  CHECK(default_forest_subspace(2) == 1);
  CHECK(subspace_size_for_percent(100, 19) == 19);
  CHECK(subspace_size_for_percent(50, 19) == 9);
  CHECK(subspace_size_for_percent(1, 19) == 1);
  CHECK_THROWS_AS(subspace_size_for_percent(0, 19), Error);
  CHECK_THROWS_AS(subspace_size_for_percent(101, 19), Error);
}

TEST_CASE("forest with every predictor per split equals bagging") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto d = forest_table(seed);
    EnsembleConfig cfg;
    cfg.n_trees = 15;
    cfg.seed = seed;
    cfg.subspace_percent = 100;
    const auto rf = fit_random_forest(d, d.target(), cfg);
    const auto bdt = fit_bagged(d, d.target(), cfg);
    CHECK(rf == bdt);
    CHECK(rf.predict_all(d) == bdt.predict_all(d));
  }
}

TEST_CASE("one tree on the identity bootstrap equals the single tree") {
  const auto d = forest_table(4);
  EnsembleConfig cfg;
  cfg.n_trees = 1;
  cfg.identity_bootstrap = true;
  const auto ens = fit_bagged(d, d.target(), cfg);
  const auto tree = fit_tree(d, d.target(), cfg.tree);
  REQUIRE(ens.trees.size() == 1);
  CHECK(ens.trees[0] == tree);
  CHECK(ens.predict_all(d) == tree.predict_all(d));
  CHECK_FALSE(oob_rmse(ens, d, d.target()).has_value());
}

TEST_CASE("ensemble prediction is the member mean in member order") {
  const auto d = forest_table(5);
  EnsembleConfig cfg;
  cfg.n_trees = 7;
  cfg.seed = 5;
  const auto rf = fit_random_forest(d, d.target(), cfg);
  for (std::size_t r = 0; r < 20; ++r) {
    double s = 0;
    for (const auto& t : rf.trees) s += t.predict(d, r);
    CHECK(rf.predict(d, r) == s / 7.0);
  }
}

TEST_CASE("bootstrap draws are reproducible and cover about 63 percent") {
  const auto a = bootstrap_sample(99, 10000);
  CHECK(a == bootstrap_sample(99, 10000));
  std::vector<char> seen(10000, 0);
  for (auto r : a) seen[r] = 1;
  const double unique = std::count(seen.begin(), seen.end(), 1) / 10000.0;
  CHECK(unique == doctest::Approx(1 - std::exp(-1.0)).epsilon(0.03));
}

TEST_CASE("parallel ensemble fit equals serial fit") {
  const auto d = forest_table(6, 800);
  EnsembleConfig cfg;
  cfg.n_trees = 12;
  cfg.seed = 6;
  CHECK(fit_random_forest(d, d.target(), cfg, Execution::Serial) ==
        fit_random_forest(d, d.target(), cfg, Execution::Parallel));
  CHECK(fit_bagged(d, d.target(), cfg, Execution::Serial) == fit_bagged(d, d.target(), cfg, Execution::Parallel));
}

TEST_CASE("bagging reduces validation error against a single tree") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> x1(600), x2(600), y(600);
  for (std::size_t i = 0; i < 600; ++i) {
    x1[i] = u(rng);
    x2[i] = u(rng);
    y[i] = 10 * std::sin(6 * x1[i]) + 5 * x2[i] + noise(rng);
  }
  Schema s({Column::continuous("a", "", 0, 1), Column::continuous("b", "", 0, 1)},
           Column::continuous("y", "", -1e9, 1e9));
  const Dataset d(s, {x1, x2}, y);
  auto [tr, va] = split_train_validation(d, 0.7, 1);
  EnsembleConfig cfg;
  cfg.seed = 3;
  cfg.n_trees = 50;
  const auto tree = fit_tree(tr, tr.target(), cfg.tree);
  const auto bag = fit_bagged(tr, tr.target(), cfg);
  auto err = [&](const std::vector<double>& p) {
    double s2 = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s2 += (p[i] - va.target()[i]) * (p[i] - va.target()[i]);
    return std::sqrt(s2 / p.size());
  };
  CHECK(err(bag.predict_all(va)) < err(tree.predict_all(va)));
  const auto oob = oob_rmse(bag, tr, tr.target());
  REQUIRE(oob.has_value());
  CHECK(*oob > 0.5);
}

TEST_CASE("bagged training error tends to exceed the single deep tree's") {
  int wins = 0;
  double tree_sum = 0, bag_sum = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto city = generate_requests(CityProfile::make_default(12), 2, seed);
    const auto d = aggregate_to_slots(city.requests, city.params, &city.conditions);
    EnsembleConfig cfg;
    cfg.seed = seed;
    cfg.n_trees = 10;
    cfg.tree.min_branch = 2;
    const double tree = rmse(fit_tree(d, d.target(), cfg.tree).predict_all(d), d.target());
    const double bag = rmse(fit_bagged(d, d.target(), cfg).predict_all(d), d.target());
    tree_sum += tree;
    bag_sum += bag;
    if (bag >= tree) ++wins;
  }
  MESSAGE("bag >= tree in " << wins << " of 20; mean " << bag_sum / 20 << " vs " << tree_sum / 20);
  CHECK(wins > 10);
  CHECK(bag_sum > tree_sum);
}
