#include "ridehail/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ridehail/csv.hpp"
#include "ridehail/error.hpp"
#include "ridehail/rng.hpp"

namespace ridehail {

namespace {

double smoothstep(double t, double a, double b) {
  if (t <= a) return 0.0;
  if (t >= b) return 1.0;
  const double x = (t - a) / (b - a);
  return x * x * (3.0 - 2.0 * x);
}

// sin^2 bump, zero outside [a, b], maximal at the window centre.
double bump(double t, double a, double b) {
  if (t <= a || t >= b) return 0.0;
  const double s = std::sin(std::numbers::pi * (t - a) / (b - a));
  return s * s;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

CityProfile CityProfile::make_default(int n_districts, double peak_rate, double zipf_exponent,
                                      std::uint64_t layout_seed) {
  if (n_districts < 1) throw Error(ErrorCategory::Config, "districts must be >= 1");
  CityProfile p;
  p.n_districts = n_districts;
  std::vector<std::size_t> rank(static_cast<std::size_t>(n_districts));
  std::iota(rank.begin(), rank.end(), std::size_t{1});
  Rng rng = make_rng(layout_seed, "city-layout");
  for (std::size_t i = rank.size(); i > 1; --i) std::swap(rank[i - 1], rank[uniform_index(rng, i)]);
  p.base_rates.resize(rank.size());
  for (std::size_t d = 0; d < rank.size(); ++d) {
    p.base_rates[d] = peak_rate * std::pow(static_cast<double>(rank[d]), -zipf_exponent);
  }
  // Small cities get their busiest district lifted to the dominance floor.
  if (n_districts >= 3) {
    const auto top = std::max_element(p.base_rates.begin(), p.base_rates.end());
    *top = std::max(*top, 10.0 * median_of(p.base_rates));
  }
  return p;
}

CityProfile CityProfile::from_config(const KeyValueConfig& cfg) {
  const int n = static_cast<int>(cfg.get_int("districts").value_or(kDefaultDistricts));
  CityProfile p = make_default(n, cfg.get_double("peak_rate").value_or(700.0),
                               cfg.get_double("zipf_exponent").value_or(1.3),
                               static_cast<std::uint64_t>(cfg.get_int("layout_seed").value_or(2016)));
  if (auto rates = cfg.get_double_list("base_rates")) {
    if (static_cast<int>(rates->size()) != n) {
      throw Error(ErrorCategory::Config, "base_rates must list exactly `districts` values");
    }
    p.base_rates = *rates;
  }
  auto set = [&](const char* key, double& field) {
    if (auto v = cfg.get_double(key)) field = *v;
  };
  set("morning_amplification", p.morning_amplification);
  set("evening_amplification", p.evening_amplification);
  set("weekend_level", p.weekend_level);
  set("saturday_factor", p.saturday_factor);
  set("sunday_factor", p.sunday_factor);
  set("dispersion", p.dispersion);
  set("fare_base", p.fare_base);
  set("surge_coefficient", p.surge_coefficient);
  set("surge_noise", p.surge_noise);
  set("trip_cost_mean", p.trip_cost_mean);
  set("weather_effect", p.weather_effect);
  set("activity_sd", p.activity_sd);
  set("activity_persistence", p.activity_persistence);
  if (auto v = cfg.get_int("start_dow")) p.start_dow = static_cast<int>(*v);
  cfg.require_all_consumed();
  p.validate();
  return p;
}

KeyValueConfig CityProfile::to_config() const {
  KeyValueConfig cfg;
  cfg.set("districts", std::to_string(n_districts));
  std::string rates;
  for (std::size_t i = 0; i < base_rates.size(); ++i) {
    if (i) rates += ",";
    rates += csv::format_double(base_rates[i]);
  }
  cfg.set("base_rates", rates);
  cfg.set("morning_amplification", csv::format_double(morning_amplification));
  cfg.set("evening_amplification", csv::format_double(evening_amplification));
  cfg.set("weekend_level", csv::format_double(weekend_level));
  cfg.set("saturday_factor", csv::format_double(saturday_factor));
  cfg.set("sunday_factor", csv::format_double(sunday_factor));
  cfg.set("dispersion", csv::format_double(dispersion));
  cfg.set("fare_base", csv::format_double(fare_base));
  cfg.set("surge_coefficient", csv::format_double(surge_coefficient));
  cfg.set("surge_noise", csv::format_double(surge_noise));
  cfg.set("trip_cost_mean", csv::format_double(trip_cost_mean));
  cfg.set("weather_effect", csv::format_double(weather_effect));
  cfg.set("activity_sd", csv::format_double(activity_sd));
  cfg.set("activity_persistence", csv::format_double(activity_persistence));
  cfg.set("start_dow", std::to_string(start_dow));
  return cfg;
}

double CityProfile::diurnal(int dow, int slot_of_day) const {
  const double t = (slot_of_day + 0.5) / 6.0;  // hour at slot centre
  if (dow <= 5) {
    const double level = 0.06 + 0.94 * smoothstep(t, 5.0, 8.0) - 0.7 * smoothstep(t, 20.5, 24.0);
    return level * (1.0 + (morning_amplification - 1.0) * bump(t, 7.0, 10.0)) *
           (1.0 + (evening_amplification - 1.0) * bump(t, 16.5, 20.0));
  }
  const double level = 0.08 + 0.92 * smoothstep(t, 7.0, 11.0) - 0.5 * smoothstep(t, 21.0, 24.0);
  const double day_factor = dow == 6 ? saturday_factor : sunday_factor;
  return weekend_level * day_factor * level * (1.0 + 0.3 * bump(t, 11.0, 20.0));
}

double CityProfile::configured_share(int district_id) const {
  const double total = std::accumulate(base_rates.begin(), base_rates.end(), 0.0);
  return total > 0 ? base_rates.at(static_cast<std::size_t>(district_id - 1)) / total : 0.0;
}

void CityProfile::validate() const {
  if (n_districts < 1 || static_cast<int>(base_rates.size()) != n_districts) {
    throw Error(ErrorCategory::Config, "profile needs one base rate per district");
  }
  for (double r : base_rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw Error(ErrorCategory::Config, "base rates must be >= 0");
  }
  if (!(dispersion > 0.0)) throw Error(ErrorCategory::Config, "dispersion must be > 0");
  if (morning_amplification < 0 || evening_amplification < 0 || weekend_level < 0 ||
      saturday_factor < 0 || sunday_factor < 0 || weather_effect < 0) {
    throw Error(ErrorCategory::Config, "diurnal multipliers must be nonnegative");
  }
  if (fare_base < 0 || surge_coefficient < 0 || surge_noise < 0 || trip_cost_mean < 0) {
    throw Error(ErrorCategory::Config, "price parameters must be nonnegative");
  }
  if (activity_sd < 0 || activity_persistence < 0 || activity_persistence >= 1) {
    throw Error(ErrorCategory::Config, "need activity_sd >= 0 and activity_persistence in [0, 1)");
  }
  if (start_dow < 1 || start_dow > 7) throw Error(ErrorCategory::Config, "start_dow must be in [1,7]");
  const double top = *std::max_element(base_rates.begin(), base_rates.end());
  if (top < 10.0 * median_of(base_rates)) {
    throw Error(ErrorCategory::Config,
                "profile needs a dominant district (base rate >= 10x the median)");
  }
}

namespace {

struct DayOutput {
  std::vector<RawRequest> requests;
  std::vector<LosShares> district_los;  // [slot * n_districts + d]
  std::vector<LosShares> city_los;      // [slot]
};

LosShares shares_from_congestion(double c, Rng& rng) {
  std::normal_distribution<double> jitter(0.0, 0.01);
  LosShares s;
  s[1] = std::max(0.0, 0.22 * c + jitter(rng));
  s[2] = std::max(0.0, 0.10 * c + 0.5 * jitter(rng));
  s[3] = std::max(0.0, 0.07 * c * c + 0.5 * jitter(rng));
  const double rest = s[1] + s[2] + s[3];
  if (rest > 1.0) {
    for (int i = 1; i < 4; ++i) s[i] /= rest;
  }
  s[0] = std::max(0.0, 1.0 - (s[1] + s[2] + s[3]));
  return s;
}

}  // namespace

SyntheticCity generate_requests(const CityProfile& profile, int n_days, std::uint64_t seed) {
  profile.validate();
  if (n_days < 1) throw Error(ErrorCategory::Config, "n_days must be >= 1");
  const int nd = profile.n_districts;

  SyntheticCity city;
  city.params = AggregationParams{nd, n_days, profile.start_dow};
  city.conditions = SlotConditions(nd, n_days);

  // Weather: a sticky Markov chain over the 0..9 index, one reading per
  // 180-minute block; temperature follows a daily cycle, PM2.5 an AR(1).
  std::vector<WeatherReading> weather(static_cast<std::size_t>(n_days) * kWeatherBlocksPerDay);
  {
    Rng rng = make_rng(seed, "weather");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::discrete_distribution<int> fresh({20, 14, 10, 8, 6, 5, 4, 3, 2, 1});
    std::normal_distribution<double> noise(0.0, 1.0);
    int state = 0;
    double pm = 116.0;
    double day_offset = 0.0;
    for (int day = 0; day < n_days; ++day) {
      day_offset = 2.0 * noise(rng);
      for (int b = 0; b < kWeatherBlocksPerDay; ++b) {
        if (u(rng) > 0.7) state = fresh(rng);
        const double hour = b * 3.0 + 1.5;
        const double temp = 6.0 + day_offset + 4.0 * std::sin(2.0 * std::numbers::pi * (hour - 9.0) / 24.0);
        pm = std::max(0.0, 116.0 + 0.8 * (pm - 116.0) + 25.0 * noise(rng));
        const WeatherReading w{state, std::round(temp * 10.0) / 10.0, std::round(pm * 10.0) / 10.0};
        weather[static_cast<std::size_t>(day) * kWeatherBlocksPerDay + b] = w;
        city.conditions.set_weather(day, b, w);
      }
    }
  }

  // Destination choice: districts sit on a ring and trip probability decays
  // with the squared ring distance, so the number of distinct destinations
  // keeps growing with slot demand instead of saturating early.
  std::vector<std::discrete_distribution<int>> destination_dist;
  for (int d = 0; d < nd; ++d) {
    std::vector<double> w(static_cast<std::size_t>(nd));
    for (int j = 0; j < nd; ++j) {
      const int gap = std::abs(j - d);
      const int ring = std::min(gap, nd - gap);
      w[j] = 1.0 / ((1.0 + ring) * (1.0 + ring));
    }
    destination_dist.emplace_back(w.begin(), w.end());
  }
  // District size in [0,1] for congestion.
  const double top_rate = *std::max_element(profile.base_rates.begin(), profile.base_rates.end());
  std::vector<double> size_norm(static_cast<std::size_t>(nd), 0.0);
  for (int d = 0; d < nd; ++d) {
    size_norm[d] = top_rate > 0 ? std::sqrt(profile.base_rates[d] / top_rate) : 0.0;
  }
  double peak_curve = 0;
  for (int dow = 1; dow <= 7; ++dow) {
    for (int s = 0; s < kSlotsPerDay; ++s) peak_curve = std::max(peak_curve, profile.diurnal(dow, s));
  }
  const double rate_total = std::accumulate(profile.base_rates.begin(), profile.base_rates.end(), 0.0);

  std::vector<DayOutput> days(static_cast<std::size_t>(n_days));
#pragma omp parallel for schedule(dynamic)
  for (int day = 0; day < n_days; ++day) {
    Rng rng = make_rng(seed, "day", static_cast<std::uint64_t>(day));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_int_distribution<int> second(0, kMinutesPerSlot * 60 - 1);
    std::exponential_distribution<double> trip(profile.trip_cost_mean > 0 ? 1.0 / profile.trip_cost_mean
                                                                          : 1.0);
    auto destinations = destination_dist;  // distributions are not shared across threads
    const int dow = day_of_week(profile.start_dow, day);
    DayOutput& out = days[static_cast<std::size_t>(day)];
    out.district_los.resize(static_cast<std::size_t>(kSlotsPerDay) * nd);
    out.city_los.resize(kSlotsPerDay);
    // Latent district activity: a stationary AR(1) in log demand, restarted
    // each day; congestion responds to it as well as to the diurnal curve.
    const double innovation = profile.activity_sd *
                              std::sqrt(1.0 - profile.activity_persistence * profile.activity_persistence);
    std::vector<double> activity(static_cast<std::size_t>(nd));
    for (auto& a : activity) a = profile.activity_sd * noise(rng);

    for (int slot = 0; slot < kSlotsPerDay; ++slot) {
      const auto& w = weather[static_cast<std::size_t>(day) * kWeatherBlocksPerDay +
                              slot / kSlotsPerWeatherBlock];
      const double curve = profile.diurnal(dow, slot);
      const double weather_factor = 1.0 + profile.weather_effect * w.weather;
      LosShares city_sum{0, 0, 0, 0};
      for (int d = 0; d < nd; ++d) {
        double& act = activity[static_cast<std::size_t>(d)];
        if (slot > 0) act = profile.activity_persistence * act + innovation * noise(rng);
        const double mu = profile.base_rates[d] * curve * weather_factor *
                          std::exp(act - 0.5 * profile.activity_sd * profile.activity_sd);
        long long count = 0;
        if (mu > 0) {
          std::gamma_distribution<double> gamma(profile.dispersion, mu / profile.dispersion);
          const double lambda = gamma(rng);
          if (lambda > 0) {
            std::poisson_distribution<long long> poisson(lambda);
            count = poisson(rng);
          }
        }
        const double slot_start = static_cast<double>(day) * 86400.0 + slot * kMinutesPerSlot * 60.0;
        const double surge_draw = std::exp(profile.surge_noise * noise(rng) -
                                           0.5 * profile.surge_noise * profile.surge_noise);
        const double fare = profile.fare_base *
                            (1.0 + profile.surge_coefficient * std::sqrt(static_cast<double>(count)) * surge_draw);
        for (long long i = 0; i < count; ++i) {
          RawRequest r;
          r.district_id = d + 1;
          r.timestamp = slot_start + second(rng);
          r.price = std::round((fare + trip(rng)) * 100.0) / 100.0;
          r.destination_district = destinations[static_cast<std::size_t>(d)](rng) + 1;
          out.requests.push_back(r);
        }

        const double congestion =
            std::clamp(curve / peak_curve * (0.55 + 0.45 * size_norm[d]) * std::exp(0.5 * act) +
                           0.05 * noise(rng),
                       0.0, 1.0);
        LosShares s = shares_from_congestion(congestion, rng);
        out.district_los[static_cast<std::size_t>(slot) * nd + d] = s;
        const double weight = rate_total > 0 ? profile.base_rates[d] / rate_total : 1.0 / nd;
        for (int k = 0; k < 4; ++k) city_sum[k] += weight * s[k];
      }
      double total = city_sum[0] + city_sum[1] + city_sum[2] + city_sum[3];
      if (total > 1.0) {
        for (auto& v : city_sum) v /= total;
      }
      out.city_los[static_cast<std::size_t>(slot)] = city_sum;
    }
  }

  std::size_t n_requests = 0;
  for (const auto& d : days) n_requests += d.requests.size();
  city.requests.reserve(n_requests);
  for (int day = 0; day < n_days; ++day) {
    auto& out = days[static_cast<std::size_t>(day)];
    city.requests.insert(city.requests.end(), out.requests.begin(), out.requests.end());
    for (int slot = 0; slot < kSlotsPerDay; ++slot) {
      city.conditions.set_city_los(day, slot, out.city_los[static_cast<std::size_t>(slot)]);
      for (int d = 0; d < nd; ++d) {
        city.conditions.set_district_los(d + 1, day, slot,
                                         out.district_los[static_cast<std::size_t>(slot) * nd + d]);
      }
    }
    out = DayOutput{};
  }
  return city;
}

}  // namespace ridehail
