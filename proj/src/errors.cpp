#include "qlidar/errors.hpp"

namespace qlidar {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_params: return "InvalidParams";
    case ErrorCode::degenerate_herald: return "DegenerateHerald";
    case ErrorCode::degenerate_probability: return "DegenerateProbability";
    case ErrorCode::count_exceeds_trials: return "CountExceedsTrials";
    case ErrorCode::window_too_large: return "WindowTooLarge";
    case ErrorCode::empty_series: return "EmptySeries";
    case ErrorCode::no_convergence: return "NoConvergence";
    case ErrorCode::insufficient_statistics: return "InsufficientStatistics";
    case ErrorCode::unsorted_stream: return "UnsortedStream";
    case ErrorCode::format_error: return "FormatError";
    case ErrorCode::non_monotonic_timestamps: return "NonMonotonicTimestamps";
    case ErrorCode::rate_exceeds_brightness: return "RateExceedsBrightness";
    case ErrorCode::negative_net_rate: return "NegativeNetRate";
    case ErrorCode::no_root: return "NoRoot";
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace qlidar
