#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ridehail/kv_config.hpp"
#include "ridehail/slots.hpp"

namespace ridehail {

/// Parameters of a synthetic city. Expected requests in a slot are
/// base_rate[district] * diurnal(dow, slot) * weather factor; realized
/// counts are negative-binomial around that mean.
struct CityProfile {
  int n_districts = kDefaultDistricts;
  std::vector<double> base_rates;  // indexed by district_id - 1

  double morning_amplification = 3.0;  // peak factor inside 07:00-10:00
  double evening_amplification = 2.5;  // peak factor inside 16:30-20:00
  double weekend_level = 0.8;
  double saturday_factor = 1.15;
  double sunday_factor = 0.85;
  double dispersion = 10000.0;  // negative-binomial size; variance = mu + mu^2 / dispersion

  int start_dow = 5;

  double fare_base = 8.0;
  // Surge multiplier 1 + surge_coefficient * sqrt(slot demand) * lognormal
  // noise, shared by the requests of a slot.
  double surge_coefficient = 0.02;
  double surge_noise = 0.1;
  double trip_cost_mean = 9.0;
  double weather_effect = 0.03;  // demand multiplier per weather index step
  // Latent per-district activity in log demand (AR(1) over slots, restarted
  // daily). It also shifts congestion, so LoS shares carry demand signal.
  double activity_sd = 0.0;
  double activity_persistence = 0.95;

  /// Zipf-shaped heavy tail: rate of the district ranked r is
  /// peak_rate * r^-exponent; ranks are scattered over district ids by a
  /// fixed permutation drawn from `layout_seed`. With three or more
  /// districts the busiest rate is raised to at least 10x the median.
  static CityProfile make_default(int n_districts = kDefaultDistricts, double peak_rate = 700.0,
                                  double zipf_exponent = 1.3, std::uint64_t layout_seed = 2016);

  /// Builds a profile from `key = value` entries; unknown keys are rejected.
  static CityProfile from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;

  /// Diurnal multiplier for a day of week (1 = Monday) and 10-minute slot.
  double diurnal(int dow, int slot_of_day) const;

  /// Share of expected city demand generated by `district_id`.
  double configured_share(int district_id) const;

  /// Throws a config error unless multipliers are nonnegative, dispersion is
  /// positive and some district has at least 10x the median base rate.
  void validate() const;
};

struct SyntheticCity {
  AggregationParams params;
  std::vector<RawRequest> requests;  // ordered by (day, slot, district)
  SlotConditions conditions;
};

/// Deterministic in (profile, n_days, seed). Weather is drawn first from
/// its own stream; each day then uses a sub-seed derived from `seed` and the
/// day index, so days are generated in parallel without changing output.
SyntheticCity generate_requests(const CityProfile& profile, int n_days, std::uint64_t seed);

}  // namespace ridehail
