#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "doctest.h"
#include "ridehail/csv.hpp"
#include "ridehail/error.hpp"
#include "ridehail/slots.hpp"
#include "support.hpp"

using namespace ridehail;

TEST_CASE("time of day encoding") {
  CHECK(encode_time_of_day(0, 0) == 0);
  CHECK(encode_time_of_day(23, 59) == 143);
  CHECK(encode_time_of_day(7, 35) == 45);
  CHECK_THROWS_AS(encode_time_of_day(24, 0), Error);
  CHECK_THROWS_AS(encode_time_of_day(3, 60), Error);
  CHECK_THROWS_AS(encode_time_of_day(-1, 0), Error);
  for (int h = 0; h < 24; ++h) {
    for (int m = 0; m < 60; ++m) CHECK(encode_time_of_day(h, m) == (h * 60 + m) / 10);
  }
}

TEST_CASE("day of week wraps from the start weekday") {
  CHECK(day_of_week(5, 0) == 5);
  CHECK(day_of_week(5, 2) == 7);
  CHECK(day_of_week(5, 3) == 1);
  CHECK(day_of_week(1, 13) == 7);
}

TEST_CASE("slot table schema has the 19 ranked predictors") {
  const Schema s = Schema::slot_table(66);
  CHECK(s.n_predictors() == 19);
  CHECK(s.target().name == "demand");
  CHECK(s.predictor(0).is_categorical());
  CHECK(s.predictor(0).level_count() == 66);
  CHECK(s.predictor(s.predictor_index(col::kDow)).level_count() == 7);
  CHECK(s.predictor(s.predictor_index(col::kWeather)).is_categorical());
  CHECK_FALSE(s.predictor(s.predictor_index(col::kTimeOfDay)).is_categorical());
  std::set<std::string> names;
  for (const auto& c : s.predictors()) names.insert(c.name);
  CHECK(names.size() == 19);
}

TEST_CASE("aggregation materializes every slot") {
  SUBCASE("66 districts over 21 days") {
    const auto d = aggregate_to_slots({}, AggregationParams{66, 21, 5});
    CHECK(d.rows() == 199584);
  }
  SUBCASE("empty stream on one district and day") {
    const auto d = aggregate_to_slots({}, AggregationParams{1, 1, 1});
    REQUIRE(d.rows() == 144);
    double total = 0;
    for (double v : d.target()) total += v;
    CHECK(total == 0);
    const auto dest = d.column(d.schema().predictor_index(col::kDestinations));
    const auto price = d.column(d.schema().predictor_index(col::kPriceAvg));
    for (std::size_t r = 0; r < d.rows(); ++r) {
      CHECK(dest[r] == 1);
      CHECK(price[r] == 0);
    }
  }
}

TEST_CASE("aggregation matches a hash-map tally") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> district(1, 2);
  std::uniform_real_distribution<double> when(0.0, 86400.0);
  std::uniform_real_distribution<double> price(5.0, 40.0);
  std::vector<RawRequest> reqs(1000);
  for (auto& r : reqs) r = {district(rng), when(rng), std::round(price(rng) * 100) / 100, district(rng)};

  struct Cell {
    int count = 0;
    std::set<int> dests;
    double sum = 0;
    std::vector<double> prices;
  };
  std::map<std::pair<int, int>, Cell> tally;  // (district, slot)
  for (const auto& r : reqs) {
    auto& c = tally[{r.district_id, static_cast<int>(r.timestamp) / 600}];
    ++c.count;
    c.dests.insert(r.destination_district);
    c.sum += r.price;
    c.prices.push_back(r.price);
  }

  const auto d = aggregate_to_slots(reqs, AggregationParams{2, 1, 3});
  const auto keys = slot_keys(d);
  const auto& s = d.schema();
  double total = 0;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    total += d.target()[r];
    CHECK(keys[r].dow == 3);
    auto it = tally.find({keys[r].district_id, keys[r].slot_of_day});
    if (it == tally.end()) {
      CHECK(d.target()[r] == 0);
      continue;
    }
    const Cell& c = it->second;
    CHECK(d.target()[r] == c.count);
    CHECK(d.at(r, s.predictor_index(col::kDestinations)) == static_cast<double>(c.dests.size()));
    CHECK(d.at(r, s.predictor_index(col::kPriceAvg)) == doctest::Approx(c.sum / c.count).epsilon(1e-12));
    CHECK(d.at(r, s.predictor_index(col::kPriceMin)) == *std::min_element(c.prices.begin(), c.prices.end()));
    CHECK(d.at(r, s.predictor_index(col::kPriceMax)) == *std::max_element(c.prices.begin(), c.prices.end()));
  }
  CHECK(total == 1000);
}

TEST_CASE("aggregation rejects out-of-range requests with their index") {
  SlotAggregator agg(AggregationParams{3, 2, 1});
  agg.add({1, 10.0, 5.0, 2});
  try {
    agg.add({4, 20.0, 5.0, 1});
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Range);
    CHECK(std::string(e.what()).find("request index 1") != std::string::npos);
  }
  CHECK_THROWS_AS(agg.add({1, 2 * 86400.0, 5.0, 1}), Error);
  CHECK_THROWS_AS(agg.add({1, -1.0, 5.0, 1}), Error);
  CHECK(agg.requests_seen() == 1);
}

TEST_CASE("median price uses the middle pair for even counts") {
  std::vector<RawRequest> reqs = {{1, 1.0, 10.0, 1}, {1, 2.0, 30.0, 1}, {1, 3.0, 20.0, 1}, {1, 4.0, 50.0, 1}};
  const auto d = aggregate_to_slots(reqs, AggregationParams{1, 1, 1});
  const auto& s = d.schema();
  CHECK(d.at(0, s.predictor_index(col::kPriceMedian)) == 25.0);
  CHECK(d.at(0, s.predictor_index(col::kPriceAvg)) == 27.5);
  CHECK(d.at(0, s.predictor_index(col::kDestinations)) == 1);
}

TEST_CASE("conditions are forward-filled onto slots") {
  SlotConditions cond(1, 1);
  cond.set_weather(0, 1, WeatherReading{3, 4.5, 80.0});
  cond.set_district_los(1, 0, 20, LosShares{0.5, 0.3, 0.2, 0.0});
  const auto d = aggregate_to_slots({}, AggregationParams{1, 1, 1}, &cond);
  const auto& s = d.schema();
  const auto w = s.predictor_index(col::kWeather);
  const auto t1 = s.predictor_index(col::kTjLevel[1]);
  CHECK(d.at(17, w) == 0);
  CHECK(d.at(18, w) == 3);
  CHECK(d.at(143, w) == 3);
  CHECK(d.at(143, s.predictor_index(col::kTemperature)) == 4.5);
  CHECK(d.at(19, t1) == 0);
  CHECK(d.at(20, t1) == 0.3);
  CHECK(d.at(100, t1) == 0.3);
}

TEST_CASE("slot table CSV round trip") {
  std::mt19937_64 rng(3);
  std::vector<RawRequest> reqs(200);
  std::uniform_real_distribution<double> when(0.0, 86400.0);
  for (auto& r : reqs) r = {1 + static_cast<int>(rng() % 3), when(rng), 7.25 + (rng() % 1000) / 7.0, 1};
  const auto d = aggregate_to_slots(reqs, AggregationParams{3, 1, 2});
  test::TempDir dir("csv");
  save_slot_table(dir / "t.csv", d);
  CHECK(load_slot_table(dir / "t.csv", d.schema()) == d);

  SUBCASE("ten rows") {
    std::vector<std::size_t> first(10);
    for (std::size_t i = 0; i < 10; ++i) first[i] = i * 7;
    const auto small = d.subset(first);
    save_slot_table(dir / "s.csv", small);
    CHECK(load_slot_table(dir / "s.csv", small.schema()) == small);
  }
}

TEST_CASE("slot table loading reports schema and range errors") {
  test::TempDir dir("csvbad");
  const auto d = aggregate_to_slots({}, AggregationParams{2, 1, 1});
  save_slot_table(dir / "t.csv", d);

  SUBCASE("missing demand column") {
    std::ifstream in(dir / "t.csv");
    std::string header, line, text;
    std::getline(in, header);
    const auto cut = header.rfind(",demand");
    REQUIRE(cut != std::string::npos);
    text = header.substr(0, cut) + "\n";
    std::ofstream(dir / "bad.csv") << text;
    try {
      load_slot_table(dir / "bad.csv", d.schema());
      FAIL("expected schema error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::Schema);
      CHECK(std::string(e.what()).find("demand") != std::string::npos);
    }
  }
  SUBCASE("district outside the schema levels") {
    auto d67 = aggregate_to_slots({}, AggregationParams{67, 1, 1});
    save_slot_table(dir / "d67.csv", d67);
    try {
      load_slot_table(dir / "d67.csv", Schema::slot_table(66));
      FAIL("expected range error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::Range);
      CHECK(std::string(e.what()).find("district-id") != std::string::npos);
    }
  }
}

TEST_CASE("train/validation split") {
  SUBCASE("sizes") {
    auto s = split_indices(10, 0.7, 1);
    CHECK(s.train.size() == 7);
    CHECK(s.validation.size() == 3);
    auto big = split_indices(199584, 0.7, 1);
    CHECK(big.train.size() == 139709);
    CHECK(big.validation.size() == 59875);
  }
  SUBCASE("disjoint cover, deterministic, seed sensitive") {
    const auto base = split_indices(50, 0.7, 0);
    int differing = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto a = split_indices(50, 0.7, seed);
      const auto b = split_indices(50, 0.7, seed);
      CHECK(a.train == b.train);
      CHECK(a.validation == b.validation);
      std::vector<std::size_t> all = a.train;
      all.insert(all.end(), a.validation.begin(), a.validation.end());
      std::sort(all.begin(), all.end());
      for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
      if (seed > 0 && a.train != base.train) ++differing;
    }
    CHECK(differing == 99);
  }
  SUBCASE("row multiset preserved") {
    std::mt19937_64 rng(11);
    const auto d = test::random_table(rng, {.rows = 40});
    auto [tr, va] = split_train_validation(d, 0.7, 5);
    CHECK(tr.rows() == 28);
    std::multiset<double> before(d.target().begin(), d.target().end());
    std::multiset<double> after(tr.target().begin(), tr.target().end());
    after.insert(va.target().begin(), va.target().end());
    CHECK(before == after);
  }
}

TEST_CASE("raw request CSV round trip") {
  std::vector<RawRequest> reqs = {{1, 0.5, 12.34, 2}, {2, 86399.0, 0.0, 1}};
  test::TempDir dir("raw");
  save_raw_requests(dir / "r.csv", reqs);
  const auto back = load_raw_requests(dir / "r.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].timestamp == 0.5);
  CHECK(back[0].price == 12.34);
  CHECK(back[1].district_id == 2);
  CHECK(back[1].destination_district == 1);
}

TEST_CASE("slot record invariants") {
  SlotRecord r;
  r.price_min = 5;
  r.price_max = 4;
  CHECK_THROWS_AS(r.validate(), Error);
  r.price_max = 6;
  r.tj_level = {0.5, 0.5, 0.1, 0.0};
  CHECK_THROWS_AS(r.validate(), Error);
  r.tj_level = {0.5, 0.5, 0.0, 0.0};
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("shortest round-trip decimal formatting") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5}) {
    CHECK(csv::parse_double(csv::format_double(v)).value() == v);
  }
  CHECK(csv::format_double(0.1) == "0.1");
}
