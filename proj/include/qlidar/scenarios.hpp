#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qlidar/config.hpp"
#include "qlidar/report.hpp"

namespace qlidar {

std::string library_version();

/// Scheduled H1/H0 blocks analysed with fixed (static) coefficients.
RunReport run_detection_scenario(const ScenarioConfig& config);

/// Jammed blocks with static and LUT-tracked QI analysis, plus an unjammed
/// reference copy of the schedule at the waveform's mean rate.
RunReport run_jamming_scenario(const ScenarioConfig& config);

/// Time-tag streams per measurement, counted on every coincidence channel.
RunReport run_rangefinding_scenario(const ScenarioConfig& config);

/// Simulated calibration runs fed through the estimation pipeline.
RunReport run_calibration(const ScenarioConfig& config);

RunReport run_scenario(const ScenarioConfig& config);

/// Fraction of a jittered signal-idler delay distribution (offset from the
/// channel centre, relative std sigma) captured by a window of `window`.
double capture_fraction(double offset, double window, double sigma);

/// Per-window parameters seen by one coincidence channel: the window
/// replaces tau_c and xi is scaled by the jitter capture fraction.
SystemParams channel_params(const SystemParams& system, double window, double offset, double relative_sigma);

/// Analytic (P_FA, P_D) curves for QI and CI at the configured n_av.
NumericTable roc_table(const ScenarioConfig& config, bool quantum);

struct OracleQuantity {
  std::string name;
  double closed_form = 0.0;
  double empirical = 0.0;
  std::uint64_t trials = 0;
  double z = 0.0;  ///< (empirical - closed_form) / binomial standard error
};

struct OracleResult {
  SystemParams params;
  std::vector<OracleQuantity> quantities;

  double max_sigma() const;
};

/// Parameter sets spanning the stationary, jamming, rangefinding and
/// calibration regimes (first `n - 4` detection-like, last 4 bright and
/// background-free).
std::vector<SystemParams> oracle_parameter_sets(std::size_t n, std::uint64_t seed);

/// Photon-level sampling of `windows` windows under each hypothesis compared
/// with the closed-form probabilities.
OracleResult oracle_check(const SystemParams& params, std::uint64_t windows, Rng& rng);

}  // namespace qlidar
