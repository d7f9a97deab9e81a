#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nls {

/// Failure categories raised by the library.
///
/// The CLI maps `Category::Refusal` to exit code 1 and `Category::Config` to
/// exit code 2; everything else is treated as a refusal as well.
enum class ErrorCode {
  // operator-core
  InvalidSpacing,
  EmptyInterior,
  HaloTooSmall,
  NonSymmetricA,
  EllipticityViolated,
  InvalidCoefficient,
  NegativeWeight,
  SupportExceedsHalo,
  InconsistentInput,
  // dirichlet-eig
  NotConverged,
  NonPositiveEigenvector,
  NonPositiveInput,
  TooLargeForDenseCheck,
  // domain-sweep
  MonotonicityViolation,
  NonMonotoneSequence,
  WindowOutsideSmallestDomain,
  NoWitnessWithinTruncation,
  // maximum-principle
  BracketInvalid,
  SingularSystem,
  UnboundedRatio,
  // semilinear
  EigenvalueNotPositive,
  OrderingBroken,
  // kernel-analysis
  NegativeSolution,
  // stochastic-oracle
  ThinningBoundExceeded,
  AllPathsDead,
  InvalidParameter,
  // cli
  ConfigParse,
  UnknownCommand,
  ArtifactWriteFailure,
  SchemaMismatch,
  Internal,
};

enum class Category { Refusal, Config, Io };

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpacing: return "InvalidSpacing";
    case ErrorCode::EmptyInterior: return "EmptyInterior";
    case ErrorCode::HaloTooSmall: return "HaloTooSmall";
    case ErrorCode::NonSymmetricA: return "NonSymmetricA";
    case ErrorCode::EllipticityViolated: return "EllipticityViolated";
    case ErrorCode::InvalidCoefficient: return "InvalidCoefficient";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::SupportExceedsHalo: return "SupportExceedsHalo";
    case ErrorCode::InconsistentInput: return "InconsistentInput";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NonPositiveEigenvector: return "NonPositiveEigenvector";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::TooLargeForDenseCheck: return "TooLargeForDenseCheck";
    case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorCode::NonMonotoneSequence: return "NonMonotoneSequence";
    case ErrorCode::WindowOutsideSmallestDomain: return "WindowOutsideSmallestDomain";
    case ErrorCode::NoWitnessWithinTruncation: return "NoWitnessWithinTruncation";
    case ErrorCode::BracketInvalid: return "BracketInvalid";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::UnboundedRatio: return "UnboundedRatio";
    case ErrorCode::EigenvalueNotPositive: return "EigenvalueNotPositive";
    case ErrorCode::OrderingBroken: return "OrderingBroken";
    case ErrorCode::NegativeSolution: return "NegativeSolution";
    case ErrorCode::ThinningBoundExceeded: return "ThinningBoundExceeded";
    case ErrorCode::AllPathsDead: return "AllPathsDead";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
    case ErrorCode::ArtifactWriteFailure: return "ArtifactWriteFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

inline constexpr Category category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigParse:
    case ErrorCode::UnknownCommand:
      return Category::Config;
    case ErrorCode::ArtifactWriteFailure:
      return Category::Io;
    default:
      return Category::Refusal;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  Category category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace nls
