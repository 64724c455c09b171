#pragma once

#include <stdexcept>
#include <string>

namespace rumorgraph {

enum class ErrorCode {
  // tree construction / traversal
  NoRoot,
  Cycle,
  DuplicateId,
  DanglingParent,
  RootHasNoSubchain,
  UnknownNode,
  // ingest
  ExternalFileMissingNode,
  TooFewTrees,
  IoError,
  ParseError,
  // oracle
  ApiError,
  Timeout,
  EmptyResponse,
  ParseFailure,
  // augmentation / analytics
  SingleClass,
  UnknownChild,
  // tensor engine / model
  ShapeMismatch,
  TapeReuse,
  EmptyGroup,
  MissingVirtualNode,
  // training pipeline
  DegenerateSplit,
  EmptySplit,
  MissingArtifact,
  ConfigConflict,
};

const char* error_code_name(ErrorCode code);

/// All library failures surface as Error; code() is stable and
/// machine-parsable, what() carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rumorgraph
