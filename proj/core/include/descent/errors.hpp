#pragma once

#include <stdexcept>
#include <string>

namespace descent {

/// No CAS/Mach crossover exists in the searched altitude range.
struct NoTransitionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A descent profile has non-negative ROCD somewhere and cannot be integrated.
struct NonDescendingProfileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rejection sampling exceeded the per-sample attempt cap.
struct GenerationStalledError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Too few trajectories (or rows) to run the requested fit.
struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Serialized artifact carries an unsupported version tag.
struct ArtifactVersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number when known.
struct ParseError : std::runtime_error {
  long line = -1;
  ParseError(const std::string& msg, long line_no = -1)
      : std::runtime_error(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
        line(line_no) {}
};

}  // namespace descent
