#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qlidar/montecarlo.hpp"
#include "qlidar/params.hpp"

namespace qlidar {

enum class CalibrationConfig { source_only, noise_only, target_present, target_absent };

std::string to_string(CalibrationConfig c);

struct CalibrationRun {
  CalibrationConfig configuration = CalibrationConfig::source_only;
  std::vector<MeasurementRecord> measurements;
  double t_int = 0.1;
  double tau_c = 2e-9;

  std::uint64_t windows() const;
  std::uint64_t signal_counts() const;
  std::uint64_t idler_counts() const;
  std::uint64_t coincidence_counts() const;
};

/// literal: ratios of raw count rates.
/// thermal: per-window click probabilities are inverted through the thermal
/// vacuum law, mu = (p - p_dark) / (1 - p), which removes the saturation of
/// click detectors at finite pair number.
enum class RateMethod { literal, thermal };

std::string to_string(RateMethod m);

struct Estimate {
  double value = 0.0;
  double error = 0.0;  ///< one standard deviation, counting statistics only
};

struct Efficiencies {
  Estimate eta_s;
  Estimate eta_i;
};

/// eta = detector rate / pair rate on each arm. `dark` (optional) removes the
/// detector background. Throws Error(rate_exceeds_brightness) if either arm
/// counts faster than the source emits.
Efficiencies estimate_efficiencies(const CalibrationRun& source_only, double brightness,
                                   RateMethod method = RateMethod::literal,
                                   const CalibrationRun* dark = nullptr);

/// xi = (rate_with - dark) / (rate_without - dark) on the signal arm.
/// Throws Error(negative_net_rate) if the dark rate exceeds either rate and
/// Error(invalid_params) if the runs use different integration times.
Estimate estimate_reflectivity(const CalibrationRun& with_filter, const CalibrationRun& without_filter,
                               const CalibrationRun& dark, RateMethod method = RateMethod::literal);

struct ShapeFit {
  Estimate beta;
  Estimate gamma;
  double nbg_s = 0.0;  ///< re-estimated from the target-absent run
  double p_h0 = 0.0;
  double p_h1_ci = 0.0;
  double p_h1_qi = 0.0;
};

/// Moment-matches the single-shot click frequencies of the first `first_n`
/// measurements of each run (0 = all): nbg_s from the h0 signal rate, then
/// gamma so that p_h1_ci matches and beta so that p_h1_qi matches, each by
/// bisection of log(parameter) on [1e-3, 1e3] to 1e-6 relative.
///
/// Throws Error(no_root) if a frequency lies outside the achievable range.
ShapeFit fit_shape_params(const CalibrationRun& h0_run, const CalibrationRun& h1_run,
                          const SystemParams& params, std::size_t first_n = 100);

struct CalibrationEntry {
  std::string parameter;
  Estimate estimate;
  std::string method;
};

/// One line per entry: "parameter value error method".
std::string format_calibration_report(const std::vector<CalibrationEntry>& entries);

}  // namespace qlidar
