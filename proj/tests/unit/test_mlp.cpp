#include <cmath>
#include <random>

#include "../oracles/gradient_check.hpp"
#include "doctest.h"
#include "ridehail/error.hpp"
#include "ridehail/slots.hpp"
#include "support.hpp"

using namespace ridehail;

TEST_CASE("backpropagation matches central differences") {
  const std::vector<std::vector<std::size_t>> shapes = {
      {3, 4, 1}, {5, 6, 3, 1}, {2, 2, 1}, {7, 5, 4, 1}, {4, 8, 1}};
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto res = oracle::check_gradient(oracle::random_network(shapes[i], 9, 100 + i));
    INFO("network " << i);
    CHECK(res.max_relative_error < 1e-4);
  }
}

TEST_CASE("parameter layout") {
  const std::vector<std::size_t> sizes = {3, 4, 2, 1};
  MLP m;
  m.sizes = sizes;
  CHECK(MLP::parameter_count(sizes) == 3 * 4 + 4 + 4 * 2 + 2 + 2 + 1);
  CHECK(m.weight_offset(0) == 0);
  CHECK(m.bias_offset(0) == 12);
  CHECK(m.weight_offset(1) == 16);
  CHECK(m.bias_offset(2) == 16 + 10 + 2);
  const auto p = initialize_parameters(sizes, 1, 0.7);
  CHECK(p.size() == MLP::parameter_count(sizes));
  CHECK(p.back() == 0.7);
  for (std::size_t k = 0; k < 12; ++k) CHECK(std::abs(p[k]) <= 1.0 / std::sqrt(3.0));
}

TEST_CASE("forward pass by hand") {
  MLP m;
  m.sizes = {2, 1, 1};
  m.params = {0.5, -1.0, 0.25, 2.0, 0.5};  // w1 (1x2), b1, w2, b2
  const double h = 1.0 / (1.0 + std::exp(-(0.5 * 1.0 - 1.0 * 2.0 + 0.25)));
  CHECK(m.forward(std::vector<double>{1.0, 2.0}) == doctest::Approx(2.0 * h + 0.5).epsilon(1e-14));
  m.params[4] = -5.0;
  CHECK(m.forward(std::vector<double>{1.0, 2.0}) == 0.0);
}

TEST_CASE("encoder: bits for codes, scaling for measurements") {
  CHECK(bit_width_for(1) == 1);
  CHECK(bit_width_for(7) == 3);
  CHECK(bit_width_for(66) == 7);
  CHECK(bit_width_for(143) == 8);

  Schema s({Column::categorical("d", "", 1, 66), Column::continuous("t", "", -50, 50)},
           Column::continuous("y", "", 0, 1e9));
  const Dataset d(s, {{5, 66, 1}, {-10, 30, 10}}, {1, 2, 3});
  const auto enc = InputEncoder::fit(d);
  REQUIRE(enc.width() == 8);
  std::vector<double> out(8);
  CHECK(enc.encode(d, 0, out) == 0);
  CHECK(out == std::vector<double>{0, 0, 0, 0, 1, 0, 1, 0});
  enc.encode(d, 1, out);
  CHECK(out == std::vector<double>{1, 0, 0, 0, 0, 1, 0, 1});
  CHECK(enc.encode(std::vector<double>{1, 70}, out) == 1);
  CHECK(out[7] == 1.0);
  enc.encode(std::vector<double>{NAN, NAN}, out);
  CHECK(out == std::vector<double>(8, 0.0));
}

TEST_CASE("network predictions are never negative") {
  std::mt19937_64 rng(3);
  const auto d = test::random_table(rng, {.rows = 200, .categorical = 1, .continuous = 3});
  MLPConfig cfg;
  cfg.hidden = {8, 4};
  cfg.dropout = {0.1, 0.0};
  cfg.epochs = 5;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 20;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto m = fit_mlp(d, d.target(), cfg);
    auto shifted = m;
    shifted.params.back() -= 10.0;
    for (double p : shifted.predict_all(d)) CHECK(p >= 0.0);
    for (double p : m.predict_all(d)) CHECK(p >= 0.0);
  }
}

TEST_CASE("training lowers the error and keeps the best validation epoch") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> x(600), c(600), y(600);
  for (std::size_t i = 0; i < 600; ++i) {
    x[i] = u(rng);
    c[i] = 1 + static_cast<int>(rng() % 3);
    y[i] = 20 + 30 * x[i] * x[i] + 10 * c[i];
  }
  Schema s({Column::categorical("c", "", 1, 3), Column::continuous("x", "", 0, 1)},
           Column::continuous("y", "", 0, 1e9));
  const Dataset d(s, {c, x}, y);
  auto [tr, va] = split_train_validation(d, 0.7, 2);
  MLPConfig cfg;
  cfg.hidden = {16};
  cfg.dropout = {0.0};
  cfg.learning_rate = 0.05;
  cfg.batch_size = 16;
  cfg.epochs = 60;
  cfg.seed = 2;
  const auto m = fit_mlp(tr, tr.target(), cfg, &va);
  REQUIRE(m.history.valid_rmse.size() == 60);
  CHECK(m.history.train_rmse.back() < 0.5 * m.history.train_rmse.front());
  REQUIRE(m.best_epoch >= 1);
  const double best = *std::min_element(m.history.valid_rmse.begin(), m.history.valid_rmse.end());
  CHECK(m.history.valid_rmse[m.best_epoch - 1] == best);
  const auto p = m.predict_all(va);
  double sse = 0;
  for (std::size_t i = 0; i < p.size(); ++i) sse += (p[i] - va.target()[i]) * (p[i] - va.target()[i]);
  CHECK(std::sqrt(sse / p.size()) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("fit is deterministic under a fixed seed") {
  std::mt19937_64 rng(5);
  const auto d = test::random_table(rng, {.rows = 100, .categorical = 1, .continuous = 2});
  MLPConfig cfg;
  cfg.hidden = {6, 3};
  cfg.epochs = 3;
  cfg.seed = 9;
  CHECK(fit_mlp(d, d.target(), cfg) == fit_mlp(d, d.target(), cfg));
}

TEST_CASE("configuration and target checks") {
  MLPConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dropout = {0.5};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = MLPConfig{};
  cfg.dropout = {1.0, 0.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = MLPConfig{};
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  const auto d = test::line_table({1, 2}, {-1, 2});
  CHECK_THROWS_AS(fit_mlp(d, d.target(), MLPConfig{}), Error);
}

TEST_CASE("diverging training is reported") {
  std::mt19937_64 rng(6);
  const auto d = test::random_table(rng, {.rows = 100, .categorical = 0, .continuous = 2});
  MLPConfig cfg;
  cfg.hidden = {4};
  cfg.dropout = {0.0};
  cfg.learning_rate = 1e6;
  cfg.momentum = 0.99;
  cfg.epochs = 50;
  cfg.batch_size = 10;
  try {
    fit_mlp(d, d.target(), cfg);
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Numeric);
  }
}
