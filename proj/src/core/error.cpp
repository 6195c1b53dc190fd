#include "signal_dojo/error.hpp"

namespace signal_dojo {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::dangling_reference: return "DanglingReference";
    case ErrorCode::conflicting_phase: return "ConflictingPhase";
    case ErrorCode::empty_phase: return "EmptyPhase";
    case ErrorCode::unknown_scenario: return "UnknownScenario";
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::rate_too_high: return "RateTooHigh";
    case ErrorCode::unknown_lane: return "UnknownLane";
    case ErrorCode::unknown_movement: return "UnknownMovement";
    case ErrorCode::invalid_phase: return "InvalidPhase";
    case ErrorCode::invalid_action: return "InvalidAction";
    case ErrorCode::not_reset: return "NotReset";
    case ErrorCode::bad_resolution: return "BadResolution";
    case ErrorCode::episode_not_complete: return "EpisodeNotComplete";
    case ErrorCode::unsupported_obs_kind: return "UnsupportedObsKind";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    }
    return "Error";
}

}  // namespace signal_dojo
