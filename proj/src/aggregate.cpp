#include <algorithm>
#include <cmath>
#include <string>

#include "ridehail/csv.hpp"
#include "ridehail/error.hpp"
#include "ridehail/slots.hpp"

namespace ridehail {

int encode_time_of_day(int hour, int minute) {
  if (hour < 0 || hour > 23 || minute < 0 || minute > 59) {
    throw Error(ErrorCategory::Range, "time of day out of range: " + std::to_string(hour) + ":" +
                                          std::to_string(minute));
  }
  return hour * 6 + minute / kMinutesPerSlot;
}

int day_of_week(int start_dow, int day_index) {
  if (start_dow < 1 || start_dow > 7) throw Error(ErrorCategory::Range, "start_dow must be in [1,7]");
  if (day_index < 0) throw Error(ErrorCategory::Range, "day_index must be >= 0");
  return (start_dow - 1 + day_index) % 7 + 1;
}

void SlotRecord::validate() const {
  constexpr double eps = 1e-6;
  if (price_min > price_max) {
    throw Error(ErrorCategory::Range, "slot price_min exceeds price_max");
  }
  for (const auto* shares : {&tj_level, &tj_global}) {
    double sum = 0;
    for (double s : *shares) {
      if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCategory::Range, "LoS share outside [0,1]");
      sum += s;
    }
    if (sum > 1.0 + eps) throw Error(ErrorCategory::Range, "LoS shares sum above 1");
  }
}

Dataset make_slot_dataset(std::span<const SlotRecord> records, int n_districts) {
  Schema schema = Schema::slot_table(n_districts);
  std::vector<std::vector<double>> cols(schema.n_predictors());
  for (auto& c : cols) c.reserve(records.size());
  std::vector<double> target;
  target.reserve(records.size());
  for (const auto& r : records) {
    r.validate();
    std::size_t j = 0;
    cols[j++].push_back(r.key.district_id);
    cols[j++].push_back(r.key.slot_of_day);
    cols[j++].push_back(r.key.dow);
    cols[j++].push_back(r.destinations);
    cols[j++].push_back(r.price_avg);
    cols[j++].push_back(r.price_median);
    cols[j++].push_back(r.price_min);
    cols[j++].push_back(r.price_max);
    for (double s : r.tj_level) cols[j++].push_back(s);
    for (double s : r.tj_global) cols[j++].push_back(s);
    cols[j++].push_back(r.weather);
    cols[j++].push_back(r.temperature);
    cols[j++].push_back(r.pm25);
    target.push_back(r.demand);
  }
  return Dataset(std::move(schema), std::move(cols), std::move(target));
}

// ---------------------------------------------------------------------------
// Raw requests

void save_raw_requests(const std::filesystem::path& path, std::span<const RawRequest> requests) {
  auto out = csv::open_for_write(path);
  out << "district_id,timestamp,price,destination_district\n";
  std::string line;
  for (const auto& r : requests) {
    line = std::to_string(r.district_id);
    line += ',';
    line += csv::format_double(r.timestamp);
    line += ',';
    line += csv::format_double(r.price);
    line += ',';
    line += std::to_string(r.destination_district);
    line += '\n';
    out << line;
  }
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

void for_each_raw_request(const std::filesystem::path& path,
                          const std::function<void(const RawRequest&)>& sink) {
  csv::Reader reader(path);
  std::string line;
  if (!reader.next(line) || line != "district_id,timestamp,price,destination_district") {
    throw Error(ErrorCategory::Schema,
                path.string() + ": expected header district_id,timestamp,price,destination_district");
  }
  while (reader.next(line)) {
    if (line.empty()) continue;
    auto f = csv::split(line);
    auto where = [&] { return path.string() + ":" + std::to_string(reader.line_number()); };
    if (f.size() != 4) throw Error(ErrorCategory::Parse, where() + ": expected 4 fields");
    auto district = csv::parse_int(f[0]);
    auto ts = csv::parse_double(f[1]);
    auto price = csv::parse_double(f[2]);
    auto dest = csv::parse_int(f[3]);
    if (!district || !ts || !price || !dest) {
      throw Error(ErrorCategory::Parse, where() + ": unparsable request row");
    }
    sink(RawRequest{static_cast<int>(*district), *ts, *price, static_cast<int>(*dest)});
  }
}

std::vector<RawRequest> load_raw_requests(const std::filesystem::path& path) {
  std::vector<RawRequest> out;
  for_each_raw_request(path, [&](const RawRequest& r) { out.push_back(r); });
  return out;
}

// ---------------------------------------------------------------------------
// Conditions

SlotConditions::SlotConditions(int n_districts, int n_days)
    : n_districts_(n_districts),
      n_days_(n_days),
      district_los_(static_cast<std::size_t>(n_districts) * n_days * kSlotsPerDay),
      city_los_(static_cast<std::size_t>(n_days) * kSlotsPerDay),
      weather_(static_cast<std::size_t>(n_days) * kWeatherBlocksPerDay) {
  if (n_districts < 1 || n_days < 1) {
    throw Error(ErrorCategory::Config, "conditions need >= 1 district and >= 1 day");
  }
}

void SlotConditions::check_day_slot(int day_index, int slot_of_day) const {
  if (day_index < 0 || day_index >= n_days_ || slot_of_day < 0 || slot_of_day >= kSlotsPerDay) {
    throw Error(ErrorCategory::Range, "condition entry outside day/slot range: day " +
                                          std::to_string(day_index) + " slot " +
                                          std::to_string(slot_of_day));
  }
}

std::size_t SlotConditions::slot_index(int day_index, int slot_of_day) const {
  return static_cast<std::size_t>(day_index) * kSlotsPerDay + static_cast<std::size_t>(slot_of_day);
}

void SlotConditions::set_district_los(int district_id, int day_index, int slot_of_day,
                                      const LosShares& shares) {
  check_day_slot(day_index, slot_of_day);
  if (district_id < 1 || district_id > n_districts_) {
    throw Error(ErrorCategory::Range, "condition district out of range: " + std::to_string(district_id));
  }
  district_los_[static_cast<std::size_t>(district_id - 1) * n_days_ * kSlotsPerDay +
                slot_index(day_index, slot_of_day)] = shares;
}

void SlotConditions::set_city_los(int day_index, int slot_of_day, const LosShares& shares) {
  check_day_slot(day_index, slot_of_day);
  city_los_[slot_index(day_index, slot_of_day)] = shares;
}

void SlotConditions::set_weather(int day_index, int block, const WeatherReading& reading) {
  check_day_slot(day_index, 0);
  if (block < 0 || block >= kWeatherBlocksPerDay) {
    throw Error(ErrorCategory::Range, "weather block out of range: " + std::to_string(block));
  }
  weather_[static_cast<std::size_t>(day_index) * kWeatherBlocksPerDay + block] = reading;
}

const std::optional<LosShares>& SlotConditions::district_los(int district_id, int day_index,
                                                             int slot_of_day) const {
  return district_los_[static_cast<std::size_t>(district_id - 1) * n_days_ * kSlotsPerDay +
                       slot_index(day_index, slot_of_day)];
}

const std::optional<LosShares>& SlotConditions::city_los(int day_index, int slot_of_day) const {
  return city_los_[slot_index(day_index, slot_of_day)];
}

const std::optional<WeatherReading>& SlotConditions::weather(int day_index, int block) const {
  return weather_[static_cast<std::size_t>(day_index) * kWeatherBlocksPerDay + block];
}

void SlotConditions::save(const std::filesystem::path& dir) const {
  auto shares_text = [](const LosShares& s) {
    std::string t;
    for (double v : s) {
      t += ',';
      t += csv::format_double(v);
    }
    return t;
  };
  {
    auto out = csv::open_for_write(dir / "traffic_district.csv");
    out << "district_id,day_index,slot_of_day,tj_level_1,tj_level_2,tj_level_3,tj_level_4\n";
    for (int d = 1; d <= n_districts_; ++d) {
      for (int day = 0; day < n_days_; ++day) {
        for (int s = 0; s < kSlotsPerDay; ++s) {
          if (const auto& v = district_los(d, day, s)) {
            out << d << ',' << day << ',' << s << shares_text(*v) << '\n';
          }
        }
      }
    }
  }
  {
    auto out = csv::open_for_write(dir / "traffic_city.csv");
    out << "day_index,slot_of_day,tj_global_1,tj_global_2,tj_global_3,tj_global_4\n";
    for (int day = 0; day < n_days_; ++day) {
      for (int s = 0; s < kSlotsPerDay; ++s) {
        if (const auto& v = city_los(day, s)) out << day << ',' << s << shares_text(*v) << '\n';
      }
    }
  }
  {
    auto out = csv::open_for_write(dir / "weather.csv");
    out << "day_index,block,weather,temperature,pm25\n";
    for (int day = 0; day < n_days_; ++day) {
      for (int b = 0; b < kWeatherBlocksPerDay; ++b) {
        if (const auto& w = weather(day, b)) {
          out << day << ',' << b << ',' << w->weather << ',' << csv::format_double(w->temperature)
              << ',' << csv::format_double(w->pm25) << '\n';
        }
      }
    }
  }
}

namespace {

template <typename RowFn>
void read_table(const std::filesystem::path& path, std::string_view header, std::size_t n_fields,
                RowFn&& fn) {
  if (!std::filesystem::exists(path)) return;
  csv::Reader reader(path);
  std::string line;
  if (!reader.next(line) || line != header) {
    throw Error(ErrorCategory::Schema, path.string() + ": expected header " + std::string(header));
  }
  std::vector<double> values(n_fields);
  while (reader.next(line)) {
    if (line.empty()) continue;
    auto f = csv::split(line);
    if (f.size() != n_fields) {
      throw Error(ErrorCategory::Parse,
                  path.string() + ":" + std::to_string(reader.line_number()) + ": wrong field count");
    }
    for (std::size_t i = 0; i < n_fields; ++i) {
      auto v = csv::parse_double(f[i]);
      if (!v) {
        throw Error(ErrorCategory::Parse, path.string() + ":" + std::to_string(reader.line_number()) +
                                              ": cannot parse '" + std::string(f[i]) + "'");
      }
      values[i] = *v;
    }
    fn(values);
  }
}

}  // namespace

SlotConditions SlotConditions::load(const std::filesystem::path& dir, int n_districts, int n_days) {
  SlotConditions c(n_districts, n_days);
  read_table(dir / "traffic_district.csv",
             "district_id,day_index,slot_of_day,tj_level_1,tj_level_2,tj_level_3,tj_level_4", 7,
             [&](const std::vector<double>& v) {
               c.set_district_los(static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                                  {v[3], v[4], v[5], v[6]});
             });
  read_table(dir / "traffic_city.csv",
             "day_index,slot_of_day,tj_global_1,tj_global_2,tj_global_3,tj_global_4", 6,
             [&](const std::vector<double>& v) {
               c.set_city_los(static_cast<int>(v[0]), static_cast<int>(v[1]), {v[2], v[3], v[4], v[5]});
             });
  read_table(dir / "weather.csv", "day_index,block,weather,temperature,pm25", 5,
             [&](const std::vector<double>& v) {
               c.set_weather(static_cast<int>(v[0]), static_cast<int>(v[1]),
                             WeatherReading{static_cast<int>(v[2]), v[3], v[4]});
             });
  return c;
}

// ---------------------------------------------------------------------------
// Aggregation

SlotAggregator::SlotAggregator(AggregationParams params) : params_(params) {
  if (params_.n_districts < 1) throw Error(ErrorCategory::Config, "n_districts must be >= 1");
  if (params_.n_days < 1) throw Error(ErrorCategory::Config, "n_days must be >= 1");
  day_of_week(params_.start_dow, 0);
  const auto n_slots =
      static_cast<std::size_t>(params_.n_districts) * params_.n_days * kSlotsPerDay;
  prices_.resize(n_slots);
  destinations_.resize(n_slots);
}

void SlotAggregator::add(const RawRequest& r) {
  const std::size_t index = seen_++;
  const double horizon = static_cast<double>(params_.n_days) * 86400.0;
  auto reject = [&](const std::string& why) {
    --seen_;
    throw Error(ErrorCategory::Range, "request index " + std::to_string(index) + ": " + why);
  };
  if (r.district_id < 1 || r.district_id > params_.n_districts) {
    reject("district " + std::to_string(r.district_id) + " outside [1," +
           std::to_string(params_.n_districts) + "]");
  }
  if (r.destination_district < 1 || r.destination_district > params_.n_districts) {
    reject("destination " + std::to_string(r.destination_district) + " outside [1," +
           std::to_string(params_.n_districts) + "]");
  }
  if (!(r.timestamp >= 0.0 && r.timestamp < horizon)) {
    reject("timestamp " + csv::format_double(r.timestamp) + " outside [0," +
           csv::format_double(horizon) + ")");
  }
  if (!(r.price >= 0.0) || !std::isfinite(r.price)) reject("negative or non-finite price");

  const auto minute = static_cast<long long>(std::floor(r.timestamp / 60.0));
  const auto day = static_cast<std::size_t>(minute / 1440);
  const auto slot = static_cast<std::size_t>((minute % 1440) / kMinutesPerSlot);
  const std::size_t cell =
      (day * kSlotsPerDay + slot) * static_cast<std::size_t>(params_.n_districts) +
      static_cast<std::size_t>(r.district_id - 1);
  prices_[cell].push_back(r.price);
  destinations_[cell].push_back(r.destination_district);
}

std::vector<SlotRecord> SlotAggregator::finish_records(const SlotConditions* conditions) const {
  if (conditions && (conditions->n_districts() != params_.n_districts ||
                     conditions->n_days() != params_.n_days)) {
    throw Error(ErrorCategory::Schema, "conditions dimensions do not match aggregation parameters");
  }
  const int nd = params_.n_districts;
  std::vector<SlotRecord> records(prices_.size());

  // Forward-fill state.
  std::vector<LosShares> last_district(static_cast<std::size_t>(nd), LosShares{1, 0, 0, 0});
  LosShares last_city{1, 0, 0, 0};
  WeatherReading last_weather{};

  std::vector<double> sorted;
  std::vector<int> dests;
  for (int day = 0; day < params_.n_days; ++day) {
    const int dow = day_of_week(params_.start_dow, day);
    for (int slot = 0; slot < kSlotsPerDay; ++slot) {
      if (conditions) {
        if (const auto& c = conditions->city_los(day, slot)) last_city = *c;
        if (slot % kSlotsPerWeatherBlock == 0) {
          if (const auto& w = conditions->weather(day, slot / kSlotsPerWeatherBlock)) last_weather = *w;
        }
      }
      for (int d = 1; d <= nd; ++d) {
        const std::size_t cell =
            (static_cast<std::size_t>(day) * kSlotsPerDay + slot) * nd + static_cast<std::size_t>(d - 1);
        SlotRecord& rec = records[cell];
        rec.key = SlotKey{d, day, slot, dow};

        const auto& p = prices_[cell];
        rec.demand = static_cast<double>(p.size());
        if (!p.empty()) {
          sorted.assign(p.begin(), p.end());
          std::sort(sorted.begin(), sorted.end());
          double sum = 0;
          for (double v : p) sum += v;
          const std::size_t n = sorted.size();
          rec.price_avg = sum / static_cast<double>(n);
          rec.price_median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
          rec.price_min = sorted.front();
          rec.price_max = sorted.back();
          dests.assign(destinations_[cell].begin(), destinations_[cell].end());
          std::sort(dests.begin(), dests.end());
          rec.destinations =
              static_cast<int>(std::unique(dests.begin(), dests.end()) - dests.begin());
        }

        if (conditions) {
          if (const auto& c = conditions->district_los(d, day, slot)) last_district[d - 1] = *c;
        }
        rec.tj_level = last_district[d - 1];
        rec.tj_global = last_city;
        rec.weather = last_weather.weather;
        rec.temperature = last_weather.temperature;
        rec.pm25 = last_weather.pm25;
      }
    }
  }
  return records;
}

Dataset SlotAggregator::finish(const SlotConditions* conditions) const {
  auto records = finish_records(conditions);
  return make_slot_dataset(records, params_.n_districts);
}

Dataset aggregate_to_slots(std::span<const RawRequest> requests, const AggregationParams& params,
                           const SlotConditions* conditions) {
  SlotAggregator agg(params);
  for (const auto& r : requests) agg.add(r);
  return agg.finish(conditions);
}

std::vector<SlotKey> slot_keys(const Dataset& data) {
  const auto& schema = data.schema();
  const auto district = data.column(schema.predictor_index(col::kDistrict));
  const auto tod = data.column(schema.predictor_index(col::kTimeOfDay));
  const auto dow = data.column(schema.predictor_index(col::kDow));
  std::vector<SlotKey> keys(data.rows());
  for (std::size_t r = 0; r < keys.size(); ++r) {
    keys[r] = SlotKey{static_cast<int>(district[r]), 0, static_cast<int>(tod[r]), static_cast<int>(dow[r])};
  }
  return keys;
}

}  // namespace ridehail
