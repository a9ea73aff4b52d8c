#pragma once

#include <stdexcept>
#include <string>

namespace copho {

/// Threshold schedule cannot be built (too few removable elements).
struct ScheduleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training diverged or produced non-finite values.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Generator exhausted its retry budget.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries a 1-based line number when known.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line_no = 0)
      : std::runtime_error(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
        line(line_no) {}
  int line;
};

/// Serialized artifact has a wrong version or a checksum mismatch.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace copho
