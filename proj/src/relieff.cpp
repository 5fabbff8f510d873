#include "ridehail/relieff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ridehail/error.hpp"
#include "ridehail/rng.hpp"

namespace ridehail {

std::vector<std::size_t> relieff_sample(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> out(m);
  if (m == n) {
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  Rng rng = make_rng(seed, "relieff");
  for (auto& i : out) i = uniform_index(rng, n);
  return out;
}

namespace {

struct AttributeScale {
  bool categorical = false;
  double range = 0.0;  // max - min over present values; 0 = constant
};

double column_range(std::span<const double> v) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double x : v) {
    if (std::isnan(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return hi > lo ? hi - lo : 0.0;
}

double diff(const AttributeScale& s, double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return 1.0;
  if (s.categorical) return a == b ? 0.0 : 1.0;
  if (s.range == 0.0) return 0.0;
  return std::abs(a - b) / s.range;
}

struct Contribution {
  double dc = 0.0;
  std::vector<double> da;
  std::vector<double> dcda;
};

}  // namespace

WeightVector rrelieff_weights(const Dataset& data, const RReliefFConfig& config, Execution exec) {
  const std::size_t n = data.rows();
  const std::size_t p = data.n_predictors();
  const std::size_t m = config.resolved_m(n);
  if (config.k < 1 || config.k + 1 > n) {
    throw Error(ErrorCategory::Config, "relieff needs 1 <= k <= n - 1 (k = " + std::to_string(config.k) +
                                           ", n = " + std::to_string(n) + ")");
  }
  if (m < 1 || m > n) throw Error(ErrorCategory::Config, "relieff needs 1 <= m <= n");
  if (!(config.sigma > 0.0)) throw Error(ErrorCategory::Config, "relieff sigma must be > 0");

  std::vector<AttributeScale> scale(p);
  for (std::size_t a = 0; a < p; ++a) {
    scale[a].categorical = data.schema().predictor(a).is_categorical();
    scale[a].range = column_range(data.column(a));
  }
  const AttributeScale target_scale{false, column_range(data.target())};
  const auto y = data.target();

  std::vector<double> rank_weight(config.k);
  double rank_total = 0.0;
  for (std::size_t r = 0; r < config.k; ++r) {
    const double q = static_cast<double>(r + 1) / config.sigma;
    rank_weight[r] = std::exp(-q * q);
    rank_total += rank_weight[r];
  }
  for (auto& w : rank_weight) w /= rank_total;

  const auto sample = relieff_sample(n, m, config.seed);
  std::vector<Contribution> contrib(m);

  const auto m_signed = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel if (exec == Execution::Parallel)
  {
    std::vector<std::pair<double, std::size_t>> dist(n);
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t it = 0; it < m_signed; ++it) {
      const std::size_t ri = sample[it];
      std::size_t used = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == ri) continue;
        double d = 0.0;
        for (std::size_t a = 0; a < p; ++a) d += diff(scale[a], data.at(ri, a), data.at(j, a));
        dist[used++] = {d, j};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(config.k),
                        dist.begin() + static_cast<std::ptrdiff_t>(used));
      Contribution& c = contrib[it];
      c.da.assign(p, 0.0);
      c.dcda.assign(p, 0.0);
      for (std::size_t r = 0; r < config.k; ++r) {
        const std::size_t nb = dist[r].second;
        const double w = rank_weight[r];
        const double dt = diff(target_scale, y[ri], y[nb]);
        c.dc += dt * w;
        for (std::size_t a = 0; a < p; ++a) {
          const double da = diff(scale[a], data.at(ri, a), data.at(nb, a));
          c.da[a] += da * w;
          c.dcda[a] += dt * da * w;
        }
      }
    }
  }

  WeightVector out;
  out.m = m;
  out.n_da.assign(p, 0.0);
  out.n_dc_da.assign(p, 0.0);
  out.weights.assign(p, 0.0);
  for (const auto& c : contrib) {
    out.n_dc += c.dc;
    for (std::size_t a = 0; a < p; ++a) {
      out.n_da[a] += c.da[a];
      out.n_dc_da[a] += c.dcda[a];
    }
  }
  if (out.n_dc == 0.0) {
    out.warning = "target does not vary among neighbors; all weights reported as 0";
    return out;
  }
  const double rest = static_cast<double>(m) - out.n_dc;
  for (std::size_t a = 0; a < p; ++a) {
    const double first = out.n_dc_da[a] / out.n_dc;
    const double num = out.n_da[a] - out.n_dc_da[a];
    const double second = (num == 0.0 || rest <= 0.0) ? 0.0 : num / rest;
    out.weights[a] = first - second;
  }
  return out;
}

std::vector<RankedFeature> rank_features(const std::vector<double>& weights) {
  std::vector<RankedFeature> out;
  out.reserve(weights.size());
  for (std::size_t a = 0; a < weights.size(); ++a) out.push_back({a, weights[a]});
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedFeature& l, const RankedFeature& r) { return l.weight > r.weight; });
  return out;
}

std::vector<std::size_t> select_features(const std::vector<RankedFeature>& ranking, double threshold) {
  std::vector<std::size_t> out;
  for (const auto& f : ranking) {
    if (f.weight > threshold) out.push_back(f.attribute);
  }
  if (out.empty()) {
    throw Error(ErrorCategory::Config, "no feature has weight above " + std::to_string(threshold) +
                                          "; lower the selection threshold");
  }
  return out;
}

}  // namespace ridehail
