#include "cofc/error.hpp"

namespace cofc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonUniformSampling: return "NonUniformSampling";
    case ErrorCode::NegativeSpeed: return "NegativeSpeed";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::PowerOutOfRange: return "PowerOutOfRange";
    case ErrorCode::PowerLimitExceeded: return "PowerLimitExceeded";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::EpisodeFinished: return "EpisodeFinished";
    case ErrorCode::ZeroDistance: return "ZeroDistance";
    case ErrorCode::EmptyEpisode: return "EmptyEpisode";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::InvalidGamma: return "InvalidGamma";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::KlDivergenceBlowup: return "KlDivergenceBlowup";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace cofc
