#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ridehail {

inline constexpr int kSlotsPerDay = 144;
inline constexpr int kMinutesPerSlot = 10;
inline constexpr int kSlotsPerWeatherBlock = 18;  // 180 minutes
inline constexpr int kWeatherBlocksPerDay = kSlotsPerDay / kSlotsPerWeatherBlock;
inline constexpr int kDefaultDistricts = 66;

/// Column names of the slot table, in schema order.
namespace col {
inline constexpr std::string_view kDistrict = "district-id";
inline constexpr std::string_view kTimeOfDay = "time of day";
inline constexpr std::string_view kDow = "dow";
inline constexpr std::string_view kDestinations = "destinations";
inline constexpr std::string_view kPriceAvg = "price-avg";
inline constexpr std::string_view kPriceMedian = "price-median";
inline constexpr std::string_view kPriceMin = "price-min";
inline constexpr std::string_view kPriceMax = "price-max";
inline constexpr std::string_view kTjLevel[4] = {"tj-level-1-m10", "tj-level-2-m10",
                                                 "tj-level-3-m10", "tj-level-4-m10"};
inline constexpr std::string_view kTjGlobal[4] = {"tj-global-level-1-m10", "tj-global-level-2-m10",
                                                  "tj-global-level-3-m10", "tj-global-level-4-m10"};
inline constexpr std::string_view kWeather = "weather-m180";
inline constexpr std::string_view kTemperature = "temperature-m180";
inline constexpr std::string_view kPm25 = "PM2.5-m180";
inline constexpr std::string_view kDemand = "demand";
}  // namespace col

enum class ColumnKind { Categorical, Continuous };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::string unit;
  // Categorical: valid integer level codes in [min_level, max_level].
  int min_level = 0;
  int max_level = 0;
  // Continuous: accepted value range. Integer-valued columns must hold whole
  // numbers and are bit-encoded for the network.
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool integer_valued = false;

  static Column categorical(std::string name, std::string unit, int min_level, int max_level);
  static Column continuous(std::string name, std::string unit, double lower, double upper,
                           bool integer_valued = false);

  bool is_categorical() const { return kind == ColumnKind::Categorical; }
  int level_count() const { return max_level - min_level + 1; }

  /// Empty when `value` conforms; otherwise a reason. NaN (missing) is
  /// accepted for predictors and checked by the caller for targets.
  std::optional<std::string> check(double value) const;

  bool operator==(const Column&) const = default;
};

class Schema {
 public:
  Schema() = default;
  Schema(std::vector<Column> predictors, Column target);

  /// The 19-predictor slot table plus the `demand` target.
  static Schema slot_table(int n_districts = kDefaultDistricts);

  std::span<const Column> predictors() const { return predictors_; }
  const Column& predictor(std::size_t j) const { return predictors_.at(j); }
  const Column& target() const { return target_; }
  std::size_t n_predictors() const { return predictors_.size(); }

  std::optional<std::size_t> find_predictor(std::string_view name) const;
  /// Throws a schema error naming the column when absent.
  std::size_t predictor_index(std::string_view name) const;
  std::vector<std::string> predictor_names() const;

  /// Schema restricted to the given predictor indices (target kept).
  Schema select(std::span<const std::size_t> predictor_indices) const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<Column> predictors_;
  Column target_;
};

/// Column-major table of predictor values plus one target column.
/// Immutable after construction; safe to share across threads.
class Dataset {
 public:
  Dataset() = default;
  /// Validates every cell against the schema; throws a range error with the
  /// 1-based row and column name on violation.
  Dataset(Schema schema, std::vector<std::vector<double>> predictor_columns,
          std::vector<double> target);

  const Schema& schema() const { return schema_; }
  std::size_t rows() const { return target_.size(); }
  std::size_t n_predictors() const { return columns_.size(); }
  bool empty() const { return target_.empty(); }

  std::span<const double> column(std::size_t j) const { return columns_.at(j); }
  std::span<const double> target() const { return target_; }
  double at(std::size_t row, std::size_t j) const { return columns_[j][row]; }
  std::vector<double> row(std::size_t r) const;

  Dataset subset(std::span<const std::size_t> row_indices) const;
  Dataset select_predictors(std::span<const std::size_t> predictor_indices) const;

  /// Bitwise equality (NaN cells compare equal to NaN).
  bool operator==(const Dataset& other) const;

 private:
  Schema schema_;
  std::vector<std::vector<double>> columns_;
  std::vector<double> target_;
};

/// Reads a comma-separated slot table whose header names every schema
/// column (any order; extra columns ignored). `NA` marks a missing predictor.
Dataset load_slot_table(const std::filesystem::path& path, const Schema& schema);
void save_slot_table(const std::filesystem::path& path, const Dataset& data);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded random partition; |train| = round(fraction * n). Both index lists
/// are returned in ascending row order.
SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed);

std::pair<Dataset, Dataset> split_train_validation(const Dataset& data, double train_fraction,
                                                   std::uint64_t seed);

}  // namespace ridehail
