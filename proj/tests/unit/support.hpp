#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ridehail/dataset.hpp"

namespace ridehail::test {

struct TableShape {
  std::size_t rows = 8;
  std::size_t categorical = 1;  // leading categorical predictors
  std::size_t continuous = 2;
  int levels = 4;                // categorical codes 1..levels
  bool integer_values = false;   // continuous values drawn from {0,1,2,3}
  double missing_rate = 0.0;
};

/// Random table; the target is uniform on [0, 10).
inline Dataset random_table(std::mt19937_64& rng, const TableShape& s) {
  std::vector<Column> cols;
  for (std::size_t j = 0; j < s.categorical; ++j) {
    cols.push_back(Column::categorical("c" + std::to_string(j), "", 1, s.levels));
  }
  for (std::size_t j = 0; j < s.continuous; ++j) {
    cols.push_back(Column::continuous("x" + std::to_string(j), "", -1e9, 1e9));
  }
  std::uniform_int_distribution<int> level(1, s.levels);
  std::uniform_int_distribution<int> small(0, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> data(cols.size(), std::vector<double>(s.rows));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (auto& v : data[j]) {
      if (j < s.categorical) {
        v = level(rng);
      } else {
        v = s.integer_values ? small(rng) : u(rng);
      }
      if (s.missing_rate > 0 && u(rng) < s.missing_rate) v = std::nan("");
    }
  }
  std::vector<double> y(s.rows);
  for (auto& v : y) v = 10.0 * u(rng);
  return Dataset(Schema(cols, Column::continuous("y", "", -1e9, 1e9)), data, y);
}

/// One continuous predictor holding `x`.
inline Dataset line_table(const std::vector<double>& x, const std::vector<double>& y) {
  return Dataset(Schema({Column::continuous("x", "", -1e9, 1e9)}, Column::continuous("y", "", -1e9, 1e9)),
                 {x}, y);
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ridehail-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace ridehail::test
