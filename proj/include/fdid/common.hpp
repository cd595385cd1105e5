#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fdid {

// Wald denominators below this magnitude mean the design carries no usable
// first stage; ratios would explode, so estimators fail loudly instead.
inline constexpr double kDenomEps = 1e-9;

// Absolute slack used when comparing cumulative probabilities against a
// requested rank. Cumulative values are ratios of small integers that may
// travel through a few arithmetic steps; without the slack a 1-ulp wobble
// could hop a grid point.
inline constexpr double kRankFuzz = 1e-12;

// Base for every error surfaced to callers. Carries the originating module
// name so reports can say where the pipeline stopped.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Input file or column problems: missing column, unparsable value, empty file.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// The data violate an identifying assumption (no first stage, unstable
// control where stability is required, ...). Messages include a remedy hint.
class DesignError : public Error {
 public:
  using Error::Error;
};

// An operation was invoked on data that do not satisfy its contract
// (missing cell, degenerate denominator, wrong number of groups/periods).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace fdid
