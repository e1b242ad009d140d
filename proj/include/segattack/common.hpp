#pragma once

#include <stdexcept>
#include <string>

namespace segattack {

using Scalar = double;

/// Thrown for every contract violation (bad config, shape mismatch,
/// corrupt file, degenerate input). The message names the offending value.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace segattack
