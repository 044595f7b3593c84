#pragma once

#include <stdexcept>
#include <string>

namespace sfr {

enum class ErrorCode {
  FileNotFound,
  ParseError,
  EmptyCloud,
  DegenerateCloud,
  CountOutOfRange,
  BadShapeParam,
  SingularFit,
  BadArchitecture,
  BadRadius,
  ShapeMismatch,
  TapeConsumed,
  AlphaTooSmall,
  NonpositiveExtent,
  NonpositiveRadius,
  EmptySubfield,
  EmptyBatch,
  ZeroLatent,
  EmptySet,
  NoOverlap,
  NotInsideCube,
  IoError,
  VersionMismatch,
  NonFiniteLoss,
  DegenerateMesh,
  BadNormals,
  BadConfig,
};

/// Exception carrying a machine-checkable code next to the human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::CountOutOfRange: return "CountOutOfRange";
    case ErrorCode::BadShapeParam: return "BadShapeParam";
    case ErrorCode::SingularFit: return "SingularFit";
    case ErrorCode::BadArchitecture: return "BadArchitecture";
    case ErrorCode::BadRadius: return "BadRadius";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TapeConsumed: return "TapeConsumed";
    case ErrorCode::AlphaTooSmall: return "AlphaTooSmall";
    case ErrorCode::NonpositiveExtent: return "NonpositiveExtent";
    case ErrorCode::NonpositiveRadius: return "NonpositiveRadius";
    case ErrorCode::EmptySubfield: return "EmptySubfield";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::ZeroLatent: return "ZeroLatent";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::NotInsideCube: return "NotInsideCube";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DegenerateMesh: return "DegenerateMesh";
    case ErrorCode::BadNormals: return "BadNormals";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

}  // namespace sfr
