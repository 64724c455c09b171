#include "rumorgraph/error.hpp"

namespace rumorgraph {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::Cycle: return "Cycle";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DanglingParent: return "DanglingParent";
    case ErrorCode::RootHasNoSubchain: return "RootHasNoSubchain";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::ExternalFileMissingNode: return "ExternalFileMissingNode";
    case ErrorCode::TooFewTrees: return "TooFewTrees";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ApiError: return "ApiError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::UnknownChild: return "UnknownChild";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TapeReuse: return "TapeReuse";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::MissingVirtualNode: return "MissingVirtualNode";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ConfigConflict: return "ConfigConflict";
  }
  return "Unknown";
}

}  // namespace rumorgraph
