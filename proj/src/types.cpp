#include "evattack/types.hpp"

namespace evattack {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonRadialTopology: return "NonRadialTopology";
    case ErrorCode::DisconnectedBus: return "DisconnectedBus";
    case ErrorCode::BadNodeIndex: return "BadNodeIndex";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InfeasibleTarget: return "InfeasibleTarget";
    case ErrorCode::NumericalDivergence: return "NumericalDivergence";
    case ErrorCode::WiretapUnavailable: return "WiretapUnavailable";
    case ErrorCode::NotArmed: return "NotArmed";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::OracleNotConverged: return "OracleNotConverged";
    case ErrorCode::ProblemTooLarge: return "ProblemTooLarge";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::ScenarioMismatch: return "ScenarioMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace evattack
