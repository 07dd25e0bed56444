#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qlidar/click_model.hpp"
#include "qlidar/llv.hpp"
#include "qlidar/montecarlo.hpp"

namespace qlidar {

enum class WaveformKind { constant, sinusoid, white, composite };

/// Detected background rate seen by the signal detector.
struct NoiseWaveform {
  WaveformKind kind = WaveformKind::constant;
  double mean_rate = 0.0;    ///< [Hz]
  double amplitude = 0.0;    ///< [Hz]
  double period = 1.0;       ///< [s]
  double white_sigma = 0.0;  ///< [Hz], redrawn once per call
};

/// Validation issues (empty when usable).
std::vector<std::string> check(const NoiseWaveform& w);

/// Rate at time t, clamped at zero. White components consume one Gaussian
/// draw from rng; deterministic kinds leave rng untouched.
double instantaneous_rate(const NoiseWaveform& waveform, double t, Rng& rng);

struct LutLevel {
  double rate = 0.0;        ///< configured background [Hz]
  double count_rate = 0.0;  ///< expected signal click rate at that background [Hz]
  ClickProbabilities probs;
  LinearLlvCoeffs ci;
  LinearLlvCoeffs qi;
};

struct BackgroundLut {
  std::vector<LutLevel> levels;  ///< strictly increasing rate
  double t_int = 0.1;

  /// Level whose expected count rate is closest to `count_rate`; ties go to
  /// the lower level.
  std::size_t nearest(double count_rate) const;
};

/// n_levels backgrounds evenly spaced over [lo, hi]; every other parameter is
/// held fixed. Throws Error(invalid_params) if n_levels < 2 or lo >= hi.
BackgroundLut build_lut(const SystemParams& params, double lo, double hi, std::size_t n_levels);

struct TrackedLlv {
  double qi = 0.0;
  double ci = 0.0;
  std::size_t level = 0;
};

/// LLVs with the coefficients of the level matching signal_counts / t_int.
TrackedLlv tracked_llv(const MeasurementRecord& m, const BackgroundLut& lut);

/// Columns: level, rate_hz, p_h0_qi, p_h1_qi, M, C.
void write_lut_csv(std::ostream& out, const BackgroundLut& lut);

struct SinusoidFit {
  double offset = 0.0;
  double sin_coeff = 0.0;
  double cos_coeff = 0.0;

  double amplitude() const;
};

/// Least squares of values against {1, sin(2 pi t / period), cos(2 pi t / period)}.
SinusoidFit fit_sinusoid(std::span<const double> times, std::span<const double> values, double period);

}  // namespace qlidar
