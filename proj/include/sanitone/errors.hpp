#pragma once

#include <stdexcept>
#include <string>

namespace sanitone {

// Base class for every recoverable error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// signal-io
struct FormatError : Error { using Error::Error; };
struct UnsupportedChannels : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct EmptySignal : Error { using Error::Error; };

// vocoder
struct TooShort : Error { using Error::Error; };
struct FrameMismatch : Error { using Error::Error; };
struct InvalidAnalysis : Error { using Error::Error; };

// features
struct NonPositiveEnvelope : Error { using Error::Error; };
struct InsufficientVoicedFrames : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };

// neuralnet / cyclegan
struct ShapeMismatch : Error { using Error::Error; };
struct InvalidArch : Error { using Error::Error; };
struct EmptyCorpus : Error { using Error::Error; };
struct SegmentTooLong : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct CorruptFile : Error { using Error::Error; };

// pipeline
struct MalformedName : Error { using Error::Error; };
struct InfeasibleSplit : Error { using Error::Error; };
struct FilterConfigMismatch : Error { using Error::Error; };

// evaluation
struct EmptyReference : Error { using Error::Error; };
struct EmptyScores : Error { using Error::Error; };
struct DegenerateTrainingSet : Error { using Error::Error; };
struct TooFewVoicedFrames : Error { using Error::Error; };
struct AlignmentError : Error { using Error::Error; };

// harness
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };

}  // namespace sanitone
