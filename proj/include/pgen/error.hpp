#pragma once

#include <stdexcept>
#include <string>

namespace pgen {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kIo,
  kInvalidUtf8,
  kEmptyCorpus,
  kUnknownCharacter,
  kIndexOutOfRange,
  kCorpusTooShort,
  kNotACheckpoint,
  kUnsupportedVersion,
  kTruncated,
  kManifestMismatch,
  kMalformedManifest,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pgen
