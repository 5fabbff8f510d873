#include "ridehail/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

#include "ridehail/csv.hpp"
#include "ridehail/error.hpp"
#include "ridehail/rng.hpp"

namespace ridehail {

Column Column::categorical(std::string name, std::string unit, int min_level, int max_level) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::Categorical;
  c.unit = std::move(unit);
  c.min_level = min_level;
  c.max_level = max_level;
  c.lower = min_level;
  c.upper = max_level;
  c.integer_valued = true;
  return c;
}

Column Column::continuous(std::string name, std::string unit, double lower, double upper,
                          bool integer_valued) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::Continuous;
  c.unit = std::move(unit);
  c.lower = lower;
  c.upper = upper;
  c.integer_valued = integer_valued;
  return c;
}

std::optional<std::string> Column::check(double value) const {
  if (std::isnan(value)) return std::nullopt;
  if (!std::isfinite(value)) return "non-finite value";
  if (integer_valued && value != std::floor(value)) return "expected an integer";
  if (value < lower || value > upper) {
    return "value " + csv::format_double(value) + " outside [" + csv::format_double(lower) + ", " +
           csv::format_double(upper) + "]";
  }
  return std::nullopt;
}

Schema::Schema(std::vector<Column> predictors, Column target)
    : predictors_(std::move(predictors)), target_(std::move(target)) {
  if (target_.is_categorical()) {
    throw Error(ErrorCategory::Schema, "target column '" + target_.name + "' must be continuous");
  }
  for (const auto& c : predictors_) {
    if (c.name == target_.name) {
      throw Error(ErrorCategory::Schema, "column '" + c.name + "' is both predictor and target");
    }
  }
}

Schema Schema::slot_table(int n_districts) {
  if (n_districts < 1) throw Error(ErrorCategory::Schema, "n_districts must be >= 1");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<Column> p;
  p.push_back(Column::categorical(std::string(col::kDistrict), "id", 1, n_districts));
  p.push_back(Column::continuous(std::string(col::kTimeOfDay), "slot", 0, kSlotsPerDay - 1, true));
  p.push_back(Column::categorical(std::string(col::kDow), "day", 1, 7));
  p.push_back(Column::continuous(std::string(col::kDestinations), "count", 1, n_districts, true));
  for (auto name : {col::kPriceAvg, col::kPriceMedian, col::kPriceMin, col::kPriceMax}) {
    p.push_back(Column::continuous(std::string(name), "M.U.", 0, inf));
  }
  for (auto name : col::kTjLevel) p.push_back(Column::continuous(std::string(name), "share", 0, 1));
  for (auto name : col::kTjGlobal) p.push_back(Column::continuous(std::string(name), "share", 0, 1));
  p.push_back(Column::categorical(std::string(col::kWeather), "index", 0, 9));
  p.push_back(Column::continuous(std::string(col::kTemperature), "degC", -inf, inf));
  p.push_back(Column::continuous(std::string(col::kPm25), "ug/m3", 0, inf));
  return Schema(std::move(p), Column::continuous(std::string(col::kDemand), "requests", 0, inf));
}

std::optional<std::size_t> Schema::find_predictor(std::string_view name) const {
  for (std::size_t j = 0; j < predictors_.size(); ++j) {
    if (predictors_[j].name == name) return j;
  }
  return std::nullopt;
}

std::size_t Schema::predictor_index(std::string_view name) const {
  if (auto j = find_predictor(name)) return *j;
  throw Error(ErrorCategory::Schema, "no predictor column named '" + std::string(name) + "'");
}

std::vector<std::string> Schema::predictor_names() const {
  std::vector<std::string> names;
  names.reserve(predictors_.size());
  for (const auto& c : predictors_) names.push_back(c.name);
  return names;
}

Schema Schema::select(std::span<const std::size_t> predictor_indices) const {
  std::vector<Column> p;
  p.reserve(predictor_indices.size());
  for (auto j : predictor_indices) p.push_back(predictors_.at(j));
  return Schema(std::move(p), target_);
}

Dataset::Dataset(Schema schema, std::vector<std::vector<double>> predictor_columns,
                 std::vector<double> target)
    : schema_(std::move(schema)), columns_(std::move(predictor_columns)), target_(std::move(target)) {
  if (columns_.size() != schema_.n_predictors()) {
    throw Error(ErrorCategory::Schema, "expected " + std::to_string(schema_.n_predictors()) +
                                           " predictor columns, got " +
                                           std::to_string(columns_.size()));
  }
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& spec = schema_.predictor(j);
    if (columns_[j].size() != target_.size()) {
      throw Error(ErrorCategory::Schema, "column '" + spec.name + "' has " +
                                             std::to_string(columns_[j].size()) + " rows, target has " +
                                             std::to_string(target_.size()));
    }
    for (std::size_t r = 0; r < target_.size(); ++r) {
      if (auto why = spec.check(columns_[j][r])) {
        throw Error(ErrorCategory::Range,
                    "row " + std::to_string(r + 1) + " column '" + spec.name + "': " + *why);
      }
    }
  }
  const auto& tspec = schema_.target();
  for (std::size_t r = 0; r < target_.size(); ++r) {
    if (std::isnan(target_[r])) {
      throw Error(ErrorCategory::Range,
                  "row " + std::to_string(r + 1) + " column '" + tspec.name + "': missing target");
    }
    if (auto why = tspec.check(target_[r])) {
      throw Error(ErrorCategory::Range,
                  "row " + std::to_string(r + 1) + " column '" + tspec.name + "': " + *why);
    }
  }
}

std::vector<double> Dataset::row(std::size_t r) const {
  std::vector<double> out(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) out[j] = columns_[j][r];
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> row_indices) const {
  Dataset out;
  out.schema_ = schema_;
  out.columns_.resize(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    auto& dst = out.columns_[j];
    dst.reserve(row_indices.size());
    for (auto r : row_indices) dst.push_back(columns_[j].at(r));
  }
  out.target_.reserve(row_indices.size());
  for (auto r : row_indices) out.target_.push_back(target_.at(r));
  return out;
}

Dataset Dataset::select_predictors(std::span<const std::size_t> predictor_indices) const {
  Dataset out;
  out.schema_ = schema_.select(predictor_indices);
  for (auto j : predictor_indices) out.columns_.push_back(columns_.at(j));
  out.target_ = target_;
  return out;
}

namespace {

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

bool Dataset::operator==(const Dataset& other) const {
  if (!(schema_ == other.schema_) || columns_.size() != other.columns_.size()) return false;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (!bitwise_equal(columns_[j], other.columns_[j])) return false;
  }
  return bitwise_equal(target_, other.target_);
}

Dataset load_slot_table(const std::filesystem::path& path, const Schema& schema) {
  csv::Reader reader(path);
  std::string line;
  if (!reader.next(line)) throw Error(ErrorCategory::Schema, path.string() + ": empty file");

  std::map<std::string, std::size_t, std::less<>> header;
  {
    auto fields = csv::split(line);
    for (std::size_t i = 0; i < fields.size(); ++i) header.emplace(std::string(fields[i]), i);
  }
  auto locate = [&](const std::string& name) {
    auto it = header.find(name);
    if (it == header.end()) {
      throw Error(ErrorCategory::Schema, path.string() + ": missing column '" + name + "'");
    }
    return it->second;
  };
  std::vector<std::size_t> field_of(schema.n_predictors());
  for (std::size_t j = 0; j < schema.n_predictors(); ++j) field_of[j] = locate(schema.predictor(j).name);
  const std::size_t target_field = locate(schema.target().name);

  std::vector<std::vector<double>> columns(schema.n_predictors());
  std::vector<double> target;
  while (reader.next(line)) {
    if (line.empty()) continue;
    auto fields = csv::split(line);
    if (fields.size() < header.size()) {
      throw Error(ErrorCategory::Parse, path.string() + ":" + std::to_string(reader.line_number()) +
                                            ": expected " + std::to_string(header.size()) +
                                            " fields, got " + std::to_string(fields.size()));
    }
    auto cell = [&](std::size_t field, const Column& spec, bool allow_missing) {
      std::string_view text = fields[field];
      const auto where = path.string() + ":" + std::to_string(reader.line_number()) + " column '" +
                         spec.name + "'";
      if (text == "NA" || text.empty()) {
        if (!allow_missing) throw Error(ErrorCategory::Parse, where + ": missing value");
        return std::numeric_limits<double>::quiet_NaN();
      }
      auto value = csv::parse_double(text);
      if (!value) throw Error(ErrorCategory::Parse, where + ": cannot parse '" + std::string(text) + "'");
      if (auto why = spec.check(*value)) throw Error(ErrorCategory::Range, where + ": " + *why);
      return *value;
    };
    for (std::size_t j = 0; j < schema.n_predictors(); ++j) {
      columns[j].push_back(cell(field_of[j], schema.predictor(j), true));
    }
    target.push_back(cell(target_field, schema.target(), false));
  }
  return Dataset(schema, std::move(columns), std::move(target));
}

void save_slot_table(const std::filesystem::path& path, const Dataset& data) {
  auto out = csv::open_for_write(path);
  const auto& schema = data.schema();
  for (std::size_t j = 0; j < schema.n_predictors(); ++j) out << schema.predictor(j).name << ',';
  out << schema.target().name << '\n';
  std::string line;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    line.clear();
    for (std::size_t j = 0; j < data.n_predictors(); ++j) {
      line += csv::format_double(data.at(r, j));
      line += ',';
    }
    line += csv::format_double(data.target()[r]);
    line += '\n';
    out << line;
  }
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCategory::Usage, "cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCategory::Config, "train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);

  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

std::pair<Dataset, Dataset> split_train_validation(const Dataset& data, double train_fraction,
                                                   std::uint64_t seed) {
  auto idx = split_indices(data.rows(), train_fraction, seed);
  return {data.subset(idx.train), data.subset(idx.validation)};
}

}  // namespace ridehail
