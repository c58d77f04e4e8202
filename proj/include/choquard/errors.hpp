#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace choquard {

// Parameter set inside the nonexistence region or outside a solver's range.
class UnsupportedParameters : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Memory estimate of a dense kernel above the configured cap.
class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dilation ray does not meet the Pohozaev manifold (nonlocal term vanishes).
class NoProjection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solution support or decay reaches R_max; the grid is too short.
class DomainTruncation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tail window too short for a decay fit.
class InsufficientTail : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matching equation has no root (e.g. target mass exceeds total mass).
class NoSolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iteration budget exhausted. Carries the last iterate and the residual trace.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::vector<double> last_iterate,
                 std::vector<double> history)
      : std::runtime_error(what),
        last_iterate_(std::move(last_iterate)),
        history_(std::move(history)) {}

  const std::vector<double>& last_iterate() const { return last_iterate_; }
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> last_iterate_;
  std::vector<double> history_;
};

}  // namespace choquard
