#pragma once

#include <stdexcept>
#include <string>

namespace asdvid {

// Every failure mode the library can raise. The CLI maps these onto its
// stable exit codes; tests match on the kind rather than the message.
enum class ErrorKind {
  // data / manifest
  MissingFile,
  SchemaViolation,
  DuplicateVideoId,
  MissingSidecar,
  FrameCoverageGap,
  MalformedAnnotation,
  InvalidSpec,
  IoFailure,
  // preprocess
  AllFramesRejected,
  DegenerateBox,
  DegenerateConfiguration,
  // sampling
  VideoTooShort,
  MissingFrameFile,
  // model
  ShapeMismatch,
  SequenceTooLong,
  // train / eval
  TooFewSubjects,
  OutOfRangeStep,
  InvalidLabel,
  NonFiniteLoss,
  EmptyPredictionList,
  OutOfRangeProbability,
  EmptyRecords,
  // io / config
  CheckpointMismatch,
  ConfigError,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace asdvid
