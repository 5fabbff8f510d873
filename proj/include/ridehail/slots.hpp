#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ridehail/dataset.hpp"

namespace ridehail {

/// (district, day, 10-minute slot). `dow` uses 1 = Monday ... 7 = Sunday.
struct SlotKey {
  int district_id = 1;
  int day_index = 0;
  int slot_of_day = 0;
  int dow = 1;

  bool operator==(const SlotKey&) const = default;
};

/// hour * 6 + minute / 10. Throws a range error outside 0..23 / 0..59.
int encode_time_of_day(int hour, int minute);

/// Day of week of `day_index` given the weekday of day 0.
int day_of_week(int start_dow, int day_index);

using LosShares = std::array<double, 4>;

struct SlotRecord {
  SlotKey key;
  double demand = 0;
  int destinations = 1;
  double price_avg = 0;
  double price_median = 0;
  double price_min = 0;
  double price_max = 0;
  LosShares tj_level{1, 0, 0, 0};
  LosShares tj_global{1, 0, 0, 0};
  int weather = 0;
  double temperature = 0;
  double pm25 = 0;

  /// Cross-column invariants the per-column schema cannot express
  /// (price_min <= price_max, LoS shares summing to at most 1 + 1e-6).
  void validate() const;
};

/// Materializes records into the slot-table schema (row order preserved).
Dataset make_slot_dataset(std::span<const SlotRecord> records, int n_districts);

struct RawRequest {
  int district_id = 1;
  double timestamp = 0;  // seconds since dataset start
  double price = 0;
  int destination_district = 1;
};

void save_raw_requests(const std::filesystem::path& path, std::span<const RawRequest> requests);
/// Streams `district_id,timestamp,price,destination_district` rows to `sink`.
void for_each_raw_request(const std::filesystem::path& path,
                          const std::function<void(const RawRequest&)>& sink);
std::vector<RawRequest> load_raw_requests(const std::filesystem::path& path);

struct WeatherReading {
  int weather = 0;
  double temperature = 0;
  double pm25 = 0;

  bool operator==(const WeatherReading&) const = default;
};

/// Side tables that travel with the raw requests: district and city LoS
/// shares per 10-minute slot, weather per 180-minute block. Entries may be
/// absent; aggregation forward-fills from the latest earlier entry and falls
/// back to free flow / zero weather before the first one.
class SlotConditions {
 public:
  SlotConditions() = default;
  SlotConditions(int n_districts, int n_days);

  int n_districts() const { return n_districts_; }
  int n_days() const { return n_days_; }

  void set_district_los(int district_id, int day_index, int slot_of_day, const LosShares& shares);
  void set_city_los(int day_index, int slot_of_day, const LosShares& shares);
  void set_weather(int day_index, int block, const WeatherReading& reading);

  const std::optional<LosShares>& district_los(int district_id, int day_index, int slot_of_day) const;
  const std::optional<LosShares>& city_los(int day_index, int slot_of_day) const;
  const std::optional<WeatherReading>& weather(int day_index, int block) const;

  /// Writes traffic_district.csv, traffic_city.csv and weather.csv into `dir`.
  void save(const std::filesystem::path& dir) const;
  /// Reads whichever of the three files exist in `dir`.
  static SlotConditions load(const std::filesystem::path& dir, int n_districts, int n_days);

  bool operator==(const SlotConditions&) const = default;

 private:
  std::size_t slot_index(int day_index, int slot_of_day) const;
  void check_day_slot(int day_index, int slot_of_day) const;

  int n_districts_ = 0;
  int n_days_ = 0;
  std::vector<std::optional<LosShares>> district_los_;
  std::vector<std::optional<LosShares>> city_los_;
  std::vector<std::optional<WeatherReading>> weather_;
};

struct AggregationParams {
  int n_districts = kDefaultDistricts;
  int n_days = 21;
  int start_dow = 5;  // 1 January 2016 was a Friday
};

/// Streaming slot aggregation. Rows come out ordered by (day, slot, district).
class SlotAggregator {
 public:
  explicit SlotAggregator(AggregationParams params);

  /// Throws a range error naming the 0-based request index on an
  /// out-of-range district, destination or timestamp.
  void add(const RawRequest& request);
  std::size_t requests_seen() const { return seen_; }

  std::vector<SlotRecord> finish_records(const SlotConditions* conditions = nullptr) const;
  Dataset finish(const SlotConditions* conditions = nullptr) const;

 private:
  AggregationParams params_;
  std::size_t seen_ = 0;
  std::vector<std::vector<double>> prices_;
  std::vector<std::vector<int>> destinations_;
};

Dataset aggregate_to_slots(std::span<const RawRequest> requests, const AggregationParams& params,
                           const SlotConditions* conditions = nullptr);

/// Keys of a slot-table dataset, read from its district / time-of-day / dow
/// columns. `day_index` is not stored in the table and is left at 0.
std::vector<SlotKey> slot_keys(const Dataset& data);

}  // namespace ridehail
