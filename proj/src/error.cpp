#include "ridehail/error.hpp"

namespace ridehail {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Schema: return "schema";
    case ErrorCategory::Range: return "range";
    case ErrorCategory::Parse: return "parse";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Numeric: return "numeric";
    case ErrorCategory::State: return "state";
  }
  return "unknown";
}

}  // namespace ridehail
