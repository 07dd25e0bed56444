#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qlidar {

/// Target-present (h1) or target-absent (h0).
enum class Hypothesis : std::uint8_t { h0 = 0, h1 = 1 };

std::string to_string(Hypothesis h);

/// Per-coincidence-window photonic parameters. Every probability in the
/// click model is a function of this set alone.
///
/// Background means (`nbg_s`, `nbg_i`) are pre-efficiency photon numbers:
/// the detected background per window on the signal arm is `nbg_s * eta_s`.
struct SystemParams {
  double n_mean = 0.0;   ///< mean photon-pair number per window
  double xi = 1.0;       ///< round-trip target reflectivity
  double eta_s = 1.0;    ///< signal-arm detection efficiency
  double eta_i = 1.0;    ///< idler-arm detection efficiency
  double nbg_s = 0.0;    ///< signal background mean per window
  double nbg_i = 0.0;    ///< idler background mean per window
  double tau_c = 2e-9;   ///< coincidence window [s]
  double t_int = 0.1;    ///< integration time per measurement [s]
  double gamma = 1.0;    ///< classical nonlinearity fit parameter
  double beta = 1.0;     ///< heralding fit parameter

  /// Classical trial count floor(t_int / tau_c). Ratios within 1e-9 of an
  /// integer round to it so 0.1 / 2e-9 gives exactly 5e7.
  std::uint64_t ci_trials() const;

  double pair_rate() const { return n_mean / tau_c; }
  /// Detected background count rate on the signal detector [Hz].
  double signal_background_rate() const { return nbg_s * eta_s / tau_c; }
  double idler_background_rate() const { return nbg_i * eta_i / tau_c; }

  SystemParams with_xi(double value) const;
  SystemParams with_signal_background_rate(double hertz) const;
  SystemParams with_tau_c(double seconds) const;

  bool operator==(const SystemParams&) const = default;
};

/// Mean count rate [Hz].
struct RateSpec {
  double hertz = 0.0;
};

/// Per-window mean from a rate: rate * tau_c.
double rate_to_mean(RateSpec rate, double tau_c);

/// Power loss in dB to a transmission ratio, 10^(-dB/10).
double loss_db_to_transmission(double db);

struct ValidationReport {
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }
  bool contains(const std::string& fragment) const;
  std::string to_string() const;
};

ValidationReport validate(const SystemParams& params);

/// Throws Error(invalid_params) listing every issue.
void require_valid(const SystemParams& params);

/// The quantities an experimenter actually quotes. Background rates are
/// detected count rates.
struct SourceSetup {
  double pair_rate = 0.0;              ///< [Hz]
  double loss_db = 0.0;
  double eta_s = 1.0;
  double eta_i = 1.0;
  double signal_background_rate = 0.0; ///< [Hz], detected
  double idler_background_rate = 0.0;  ///< [Hz], detected
  double tau_c = 2e-9;
  double t_int = 0.1;
  double beta = 1.0;
  double gamma = 1.0;
};

SystemParams make_params(const SourceSetup& setup);

}  // namespace qlidar
