#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ridehail {

/// Coarse failure classes. The CLI prints these verbatim so scripts can
/// branch on them.
enum class ErrorCategory {
  Usage,
  Io,
  Schema,
  Range,
  Parse,
  Config,
  Numeric,
  State,
};

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace ridehail
