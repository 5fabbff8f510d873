#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ridehail/error.hpp"
#include "ridehail/eval.hpp"

using namespace ridehail;

namespace {

// Least squares via the 2x2 normal equations on [1, obs].
std::pair<double, double> normal_equations(const std::vector<double>& pred, const std::vector<double>& obs) {
  double n = pred.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sx += obs[i];
    sy += pred[i];
    sxx += obs[i] * obs[i];
    sxy += obs[i] * pred[i];
  }
  const double det = n * sxx - sx * sx;
  return {(n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
}

std::vector<SlotKey> random_keys(std::mt19937_64& rng, std::size_t n) {
  std::vector<SlotKey> keys(n);
  for (auto& k : keys) {
    k.district_id = 1 + rng() % 9;
    k.day_index = rng() % 14;
    k.slot_of_day = rng() % 144;
    k.dow = 1 + k.day_index % 7;
  }
  return keys;
}

}  // namespace

TEST_CASE("rmse by hand") {
  CHECK(rmse(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK(rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == doctest::Approx(std::sqrt(12.5)));
  CHECK_THROWS_AS(rmse(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("scatter fit agrees with the normal equations") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0, 1);
  for (int c = 0; c < 50; ++c) {
    std::vector<double> obs(40), pred(40);
    for (std::size_t i = 0; i < 40; ++i) {
      obs[i] = 50 + 20 * z(rng);
      pred[i] = 0.8 * obs[i] + 5 + 4 * z(rng);
    }
    const auto fit = fit_scatter(pred, obs);
    const auto [slope, intercept] = normal_equations(pred, obs);
    CHECK(fit.slope == doctest::Approx(slope).epsilon(1e-10));
    CHECK(fit.intercept == doctest::Approx(intercept).epsilon(1e-9));
    const double mo = std::accumulate(obs.begin(), obs.end(), 0.0) / 40;
    const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / 40;
    double cov = 0, vo = 0, vp = 0, sse = 0, sst = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      cov += (obs[i] - mo) * (pred[i] - mp);
      vo += (obs[i] - mo) * (obs[i] - mo);
      vp += (pred[i] - mp) * (pred[i] - mp);
      sse += (pred[i] - obs[i]) * (pred[i] - obs[i]);
      sst += (obs[i] - mo) * (obs[i] - mo);
    }
    CHECK(fit.r_square == doctest::Approx(cov * cov / (vo * vp)).epsilon(1e-10));
    CHECK(fit.determination == doctest::Approx(1 - sse / sst).epsilon(1e-10));
  }
}

TEST_CASE("perfect predictions give slope and R-square of one") {
  const std::vector<double> v = {3, 7, 1, 12, 5};
  const auto fit = fit_scatter(v, v);
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fit.r_square == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fit.intercept == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_scatter(std::vector<double>{1, 2}, std::vector<double>{4, 4}), Error);
  CHECK_THROWS_AS(fit_scatter(std::vector<double>{1}, std::vector<double>{4}), Error);
}

TEST_CASE("summary statistics and cumulative distribution") {
  const auto s = summary_stats(std::vector<double>{4, 1, 3, 2});
  CHECK(s.mean == 2.5);
  CHECK(s.sd == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.median == 2.5);
  CHECK(s.min == 1);
  CHECK(s.max == 4);
  CHECK(summary_stats(std::vector<double>{5, 1, 9}).median == 5);
  CHECK(cumulative_distribution(std::vector<double>{3, 1, 2}) == std::vector<double>{1, 3, 6});
  CHECK_THROWS_AS(summary_stats(std::vector<double>{}), Error);
}

TEST_CASE("grouped errors pool back to the global error") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 100);
  for (int c = 0; c < 30; ++c) {
    const std::size_t n = 50 + rng() % 500;
    std::vector<double> pred(n), obs(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = u(rng);
      obs[i] = u(rng);
    }
    const auto keys = random_keys(rng, n);
    const double global = rmse(pred, obs);
    for (auto by : {GroupBy::District, GroupBy::SlotOfDay, GroupBy::Dow}) {
      const auto groups = grouped_rmse(pred, obs, keys, by);
      double pooled = 0, running = 0;
      std::size_t count = 0;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (g > 0) CHECK(groups[g].key > groups[g - 1].key);
        CHECK(groups[g].count > 0);
        pooled += groups[g].count * groups[g].rmse * groups[g].rmse;
        running += groups[g].rmse;
        CHECK(groups[g].cumulative == doctest::Approx(running).epsilon(1e-12));
        count += groups[g].count;
      }
      CHECK(count == n);
      CHECK(std::abs(pooled - n * global * global) <= 1e-9 * n * global * global);
      CHECK(pooling_residual(groups, n, global) <= 1e-9);
    }
  }
}

TEST_CASE("group keys and report contents") {
  const std::vector<double> pred = {1, 2, 3, 4};
  const std::vector<double> obs = {1, 3, 3, 6};
  std::vector<SlotKey> keys(4);
  keys[0] = {.district_id = 2, .day_index = 0, .slot_of_day = 5, .dow = 6};
  keys[1] = {.district_id = 1, .day_index = 1, .slot_of_day = 5, .dow = 7};
  keys[2] = {.district_id = 2, .day_index = 2, .slot_of_day = 7, .dow = 1};
  keys[3] = {.district_id = 1, .day_index = 3, .slot_of_day = 7, .dow = 2};
  const auto by_d = grouped_rmse(pred, obs, keys, GroupBy::District);
  REQUIRE(by_d.size() == 2);
  CHECK(by_d[0].key == 1);
  CHECK(by_d[0].rmse == doctest::Approx(std::sqrt(2.5)));
  CHECK(by_d[1].rmse == 0.0);
  const auto r = evaluate("gbdt", pred, obs, keys);
  CHECK(r.n == 4);
  CHECK(r.rmse == doctest::Approx(std::sqrt(5.0 / 4)));
  CHECK(r.by_slot_of_day.size() == 2);
  CHECK(r.by_dow.size() == 4);
  CHECK(r.observed.max == 6);
  CHECK(to_string(GroupBy::SlotOfDay) == "slot_of_day");
  CHECK_THROWS_AS(grouped_rmse(pred, obs, std::span(keys).first(3), GroupBy::Dow), Error);
}
