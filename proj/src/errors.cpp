#include "asdvid/errors.hpp"

namespace asdvid {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::DuplicateVideoId: return "DuplicateVideoId";
    case ErrorKind::MissingSidecar: return "MissingSidecar";
    case ErrorKind::FrameCoverageGap: return "FrameCoverageGap";
    case ErrorKind::MalformedAnnotation: return "MalformedAnnotation";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::AllFramesRejected: return "AllFramesRejected";
    case ErrorKind::DegenerateBox: return "DegenerateBox";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::VideoTooShort: return "VideoTooShort";
    case ErrorKind::MissingFrameFile: return "MissingFrameFile";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SequenceTooLong: return "SequenceTooLong";
    case ErrorKind::TooFewSubjects: return "TooFewSubjects";
    case ErrorKind::OutOfRangeStep: return "OutOfRangeStep";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyPredictionList: return "EmptyPredictionList";
    case ErrorKind::OutOfRangeProbability: return "OutOfRangeProbability";
    case ErrorKind::EmptyRecords: return "EmptyRecords";
    case ErrorKind::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

}  // namespace asdvid
