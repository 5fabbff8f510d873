#pragma once

#include <span>
#include <string>
#include <vector>

#include "ridehail/slots.hpp"

namespace ridehail {

/// sqrt(mean((pred - obs)^2)).
double rmse(std::span<const double> pred, std::span<const double> obs);

struct ScatterFit {
  double r_square = 0.0;     // squared Pearson correlation of pred and obs
  double slope = 0.0;        // OLS coefficient of pred regressed on obs (with intercept)
  double intercept = 0.0;
  double determination = 0.0;  // 1 - SSE/SST of pred against obs
};

/// Throws a numeric error when obs is constant or fewer than 2 pairs.
ScatterFit fit_scatter(std::span<const double> pred, std::span<const double> obs);

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;  // population
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

SummaryStats summary_stats(std::span<const double> values);

/// Running sums of the ascending-sorted values.
std::vector<double> cumulative_distribution(std::span<const double> values);

enum class GroupBy { District, SlotOfDay, Dow };
std::string to_string(GroupBy g);

struct GroupError {
  int key = 0;
  std::size_t count = 0;
  double rmse = 0.0;
  double cumulative = 0.0;  // running sum of rmse in ascending key order
};

/// Groups without members are omitted.
std::vector<GroupError> grouped_rmse(std::span<const double> pred, std::span<const double> obs,
                                     std::span<const SlotKey> keys, GroupBy group_by);

/// Relative gap between n * rmse^2 and the per-group sum of n_g * rmse_g^2.
double pooling_residual(std::span<const GroupError> groups, std::size_t n, double global_rmse);

struct EvalReport {
  std::string model;
  std::size_t n = 0;
  double rmse = 0.0;
  ScatterFit scatter;
  SummaryStats predicted;
  SummaryStats observed;
  std::vector<GroupError> by_district;
  std::vector<GroupError> by_slot_of_day;
  std::vector<GroupError> by_dow;
};

EvalReport evaluate(std::string model, std::span<const double> pred, std::span<const double> obs,
                    std::span<const SlotKey> keys);

}  // namespace ridehail
