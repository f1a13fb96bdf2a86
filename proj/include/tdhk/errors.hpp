#pragma once

#include <stdexcept>
#include <string>

namespace tdhk {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes (config -> 2, numeric/curvature -> 3, checkpoint/format -> 4).

// Dimension mismatch between operands.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation invoked in a state that does not permit it (empty buffer,
// missing inverses, stepping a finished episode, ...).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A curvature factor could not be inverted even after damping. Carries the
// index of the offending layer when known.
struct CurvatureError : std::runtime_error {
  explicit CurvatureError(const std::string& msg, int layer = -1)
      : std::runtime_error(msg), layer_index(layer) {}
  int layer_index;
};

// NaN or Inf encountered where finite values are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration: unknown key, bad value, unknown environment name.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed episode or transition fed to the replay buffer.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or corrupt checkpoint file. Carries the byte offset at which
// the problem was detected.
struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& msg, long long pos = -1)
      : std::runtime_error(pos >= 0 ? msg + " (at byte " + std::to_string(pos) + ")" : msg),
        position(pos) {}
  long long position;
};

// Input file does not match the expected schema (metrics CSV for plotting).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tdhk
