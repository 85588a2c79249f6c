#pragma once

#include <stdexcept>
#include <string>

namespace dsstitch {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input / validation errors (bad files, bad arguments, broken invariants).
struct ValidationError : Error {
  using Error::Error;
};

struct ParseError : ValidationError {
  using ValidationError::ValidationError;
};
struct DimensionMismatch : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyDemonstration : ValidationError {
  using ValidationError::ValidationError;
};
struct AttractorInconsistent : EmptyDemonstration {
  using EmptyDemonstration::EmptyDemonstration;
};
struct TooFewPoints : ValidationError {
  using ValidationError::ValidationError;
};
struct UnknownScenario : ValidationError {
  using ValidationError::ValidationError;
};
struct DegenerateData : ValidationError {
  using ValidationError::ValidationError;
};
struct SingularCovariance : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptySelection : ValidationError {
  using ValidationError::ValidationError;
};

// Method failures: legitimate negative outcomes of a synthesis attempt.
struct MethodFailure : Error {
  using Error::Error;
};

struct OptimizationDiverged : MethodFailure {
  using MethodFailure::MethodFailure;
};
struct StabilityUnsatisfied : MethodFailure {
  using MethodFailure::MethodFailure;
};
struct NoGoalEdges : MethodFailure {
  using MethodFailure::MethodFailure;
};
struct NoPath : MethodFailure {
  using MethodFailure::MethodFailure;
};
struct SegmentReversalConflict : MethodFailure {
  using MethodFailure::MethodFailure;
};

}  // namespace dsstitch
