#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ridehail/cart.hpp"
#include "ridehail/dataset.hpp"

namespace ridehail {

struct RReliefFConfig {
  std::optional<std::size_t> m;  // sampled instances; nullopt = min(n, 1000)
  std::size_t k = 10;            // nearest neighbors
  double sigma = 20.0;           // rank-weight scale
  std::uint64_t seed = 0;

  std::size_t resolved_m(std::size_t n) const { return m.value_or(std::min<std::size_t>(n, 1000)); }
};

struct WeightVector {
  std::vector<double> weights;  // per predictor, schema order
  double n_dc = 0.0;
  std::vector<double> n_da;
  std::vector<double> n_dc_da;
  std::size_t m = 0;
  std::optional<std::string> warning;  // set when the target never differs among neighbors
};

/// Instances visited: 0..n-1 when m == n, otherwise m uniform draws with
/// replacement.
std::vector<std::size_t> relieff_sample(std::size_t n, std::size_t m, std::uint64_t seed);

/// Regression ReliefF. Neighbors are the k rows nearest to the sampled
/// instance (excluding itself) under range-normalized Manhattan distance,
/// categorical mismatch = 1; distance ties go to the lower row index. A
/// missing value differs from everything (diff 1).
WeightVector rrelieff_weights(const Dataset& data, const RReliefFConfig& config,
                              Execution exec = Execution::Parallel);

struct RankedFeature {
  std::size_t attribute;
  double weight;
};

/// Descending weight; ties by ascending attribute index.
std::vector<RankedFeature> rank_features(const std::vector<double>& weights);

/// Attributes with weight > threshold, in ranking order. Throws a config
/// error when nothing survives.
std::vector<std::size_t> select_features(const std::vector<RankedFeature>& ranking, double threshold = 0.0);

}  // namespace ridehail
