#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rfseg {

enum class ErrorCode {
  FileNotFound,
  UnsupportedFormat,
  CorruptImage,
  IoError,
  TargetSmallerThanSource,
  InvalidArgument,
  EmptyDataset,
  DimensionMismatch,
  EmptyTrainingSet,
  InsufficientSamples,
  BadMagic,
  UnsupportedVersion,
  TruncatedData,
  CorruptData,
  ArchitectureMismatch,
  EmptyTestSet,
  NoCommonImages,
  UnknownConfigKey,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptImage: return "CorruptImage";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TargetSmallerThanSource: return "TargetSmallerThanSource";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::CorruptData: return "CorruptData";
    case ErrorCode::ArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::NoCommonImages: return "NoCommonImages";
    case ErrorCode::UnknownConfigKey: return "UnknownConfigKey";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rfseg
