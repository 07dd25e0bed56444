#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qlidar {

enum class ErrorCode {
  invalid_params,
  degenerate_herald,
  degenerate_probability,
  count_exceeds_trials,
  window_too_large,
  empty_series,
  no_convergence,
  insufficient_statistics,
  unsorted_stream,
  format_error,
  non_monotonic_timestamps,
  rate_exceeds_brightness,
  negative_net_rate,
  no_root,
  config_error,
  io_error,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Library-wide exception. `code()` identifies the failure class so callers
/// can branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qlidar
