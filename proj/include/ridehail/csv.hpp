#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ridehail::csv {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

/// Splits one line on commas. No quoting: none of the artifact formats
/// carry commas inside a field.
std::vector<std::string_view> split(std::string_view line);

/// Line-oriented reader that tracks the 1-based line number for error
/// messages and strips a trailing '\r'.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  bool next(std::string& line);
  int line_number() const { return line_no_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  int line_no_ = 0;
};

/// Opens `path` for writing, creating parent directories; throws on failure.
std::ofstream open_for_write(const std::filesystem::path& path);

}  // namespace ridehail::csv
