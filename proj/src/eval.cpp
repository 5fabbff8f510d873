#include "ridehail/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ridehail/error.hpp"

namespace ridehail {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> obs) {
  if (pred.size() != obs.size()) {
    throw Error(ErrorCategory::Usage, "prediction and observation lengths differ (" + std::to_string(pred.size()) +
                                          " vs " + std::to_string(obs.size()) + ")");
  }
  if (pred.empty()) throw Error(ErrorCategory::Usage, "cannot evaluate empty inputs");
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> obs) {
  check_pair(pred, obs);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - obs[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

ScatterFit fit_scatter(std::span<const double> pred, std::span<const double> obs) {
  check_pair(pred, obs);
  if (pred.size() < 2) throw Error(ErrorCategory::Numeric, "scatter fit needs at least 2 pairs");
  const double n = static_cast<double>(pred.size());
  const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double mo = std::accumulate(obs.begin(), obs.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0, sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dx = obs[i] - mo;
    const double dy = pred[i] - mp;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    sse += (pred[i] - obs[i]) * (pred[i] - obs[i]);
  }
  if (sxx == 0.0) throw Error(ErrorCategory::Numeric, "observations are constant; slope and R-square undefined");
  ScatterFit f;
  f.slope = sxy / sxx;
  f.intercept = mp - f.slope * mo;
  f.r_square = syy == 0.0 ? 0.0 : (sxy * sxy) / (sxx * syy);
  f.determination = 1.0 - sse / sxx;
  return f;
}

SummaryStats summary_stats(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCategory::Usage, "summary of an empty sample");
  const double n = static_cast<double>(values.size());
  SummaryStats s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / n);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t h = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[h] : (sorted[h - 1] + sorted[h]) / 2.0;
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

std::vector<double> cumulative_distribution(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  std::sort(out.begin(), out.end());
  double run = 0.0;
  for (auto& v : out) {
    run += v;
    v = run;
  }
  return out;
}

std::string to_string(GroupBy g) {
  switch (g) {
    case GroupBy::District: return "district";
    case GroupBy::SlotOfDay: return "slot_of_day";
    case GroupBy::Dow: return "dow";
  }
  return "?";
}

std::vector<GroupError> grouped_rmse(std::span<const double> pred, std::span<const double> obs,
                                     std::span<const SlotKey> keys, GroupBy group_by) {
  check_pair(pred, obs);
  if (keys.size() != pred.size()) throw Error(ErrorCategory::Usage, "keys are not aligned with predictions");
  std::map<int, std::pair<std::size_t, double>> acc;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    int k = 0;
    switch (group_by) {
      case GroupBy::District: k = keys[i].district_id; break;
      case GroupBy::SlotOfDay: k = keys[i].slot_of_day; break;
      case GroupBy::Dow: k = keys[i].dow; break;
    }
    const double d = pred[i] - obs[i];
    auto& [count, sse] = acc[k];
    ++count;
    sse += d * d;
  }
  std::vector<GroupError> out;
  double run = 0.0;
  for (const auto& [key, v] : acc) {
    GroupError g;
    g.key = key;
    g.count = v.first;
    g.rmse = std::sqrt(v.second / static_cast<double>(v.first));
    run += g.rmse;
    g.cumulative = run;
    out.push_back(g);
  }
  return out;
}

double pooling_residual(std::span<const GroupError> groups, std::size_t n, double global_rmse) {
  double pooled = 0.0;
  for (const auto& g : groups) pooled += static_cast<double>(g.count) * g.rmse * g.rmse;
  const double total = static_cast<double>(n) * global_rmse * global_rmse;
  const double denom = std::max(1.0, std::abs(total));
  return std::abs(pooled - total) / denom;
}

EvalReport evaluate(std::string model, std::span<const double> pred, std::span<const double> obs,
                    std::span<const SlotKey> keys) {
  EvalReport r;
  r.model = std::move(model);
  r.n = pred.size();
  r.rmse = rmse(pred, obs);
  r.scatter = fit_scatter(pred, obs);
  r.predicted = summary_stats(pred);
  r.observed = summary_stats(obs);
  r.by_district = grouped_rmse(pred, obs, keys, GroupBy::District);
  r.by_slot_of_day = grouped_rmse(pred, obs, keys, GroupBy::SlotOfDay);
  r.by_dow = grouped_rmse(pred, obs, keys, GroupBy::Dow);
  for (const auto* groups : {&r.by_district, &r.by_slot_of_day, &r.by_dow}) {
    const double residual = pooling_residual(*groups, r.n, r.rmse);
    if (residual > 1e-9) {
      throw Error(ErrorCategory::Numeric, "grouped errors do not pool to the global RMSE (relative gap " +
                                              std::to_string(residual) + ")");
    }
  }
  return r;
}

}  // namespace ridehail
