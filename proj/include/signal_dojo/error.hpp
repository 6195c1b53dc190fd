#pragma once

#include <stdexcept>
#include <string>

namespace signal_dojo {

// Mirrors sd_status in signal_dojo.h; keep the numeric values in sync.
enum class ErrorCode : int {
    parse_error = 1,
    dangling_reference = 2,
    conflicting_phase = 3,
    empty_phase = 4,
    unknown_scenario = 5,
    config_error = 6,
    rate_too_high = 7,
    unknown_lane = 8,
    unknown_movement = 9,
    invalid_phase = 10,
    invalid_action = 11,
    not_reset = 12,
    bad_resolution = 13,
    episode_not_complete = 14,
    unsupported_obs_kind = 15,
    io_error = 16,
    invalid_argument = 17,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace signal_dojo
