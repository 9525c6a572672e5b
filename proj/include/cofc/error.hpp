#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cofc {

enum class ErrorCode {
  MalformedRow,
  NonUniformSampling,
  NegativeSpeed,
  IndexOutOfRange,
  PowerOutOfRange,
  PowerLimitExceeded,
  StepOutOfRange,
  EpisodeFinished,
  ZeroDistance,
  EmptyEpisode,
  ShapeMismatch,
  EmptyBatch,
  InsufficientSamples,
  InvalidGamma,
  NonFiniteObjective,
  KlDivergenceBlowup,
  DegenerateWeights,
  InstanceTooLarge,
  Infeasible,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cofc
