#pragma once

#include <stdexcept>
#include <string>

namespace posbias {

// Base type for everything the toolkit throws. The CLI maps subtypes to
// exit codes: EstimationImpossibleError -> 3, everything else -> 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content: bad JSON, bad header, wrong field types.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a data-model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Out-of-range or otherwise unusable function argument.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Cross-references between inputs do not line up, e.g. two contradictory
// rankings logged for the same (ranker, query).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Pairwise ratio requested with zero click mass in the denominator.
class UndefinedRatioError : public Error {
 public:
  using Error::Error;
};

// No interventional data connects position 1 to any other position.
class EstimationImpossibleError : public Error {
 public:
  using Error::Error;
};

// Metric requested on an estimate that cannot support it.
class MetricUndefinedError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace posbias
