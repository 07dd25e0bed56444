#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qlidar/calibration.hpp"
#include "qlidar/jamming.hpp"
#include "qlidar/montecarlo.hpp"
#include "qlidar/params.hpp"
#include "qlidar/timetag.hpp"

namespace qlidar {

enum class ScenarioKind { detection, jamming, rangefinding, calibration };

std::string to_string(ScenarioKind k);

struct ScheduleBlock {
  Hypothesis hypothesis = Hypothesis::h1;
  std::size_t count = 0;  ///< full-scale measurement count
};

/// Which single-shot probabilities feed the LLV coefficients.
enum class ProbabilitySource {
  model,      ///< closed form at the configured parameters
  empirical,  ///< click frequencies of the first `estimation_window` measurements
};

struct AnalysisSpec {
  std::size_t n_av = 50;
  std::vector<std::size_t> n_av_sweep{1, 2, 5, 10, 20, 50, 100};
  std::size_t roc_points = 201;
  double threshold = 0.0;
  ProbabilitySource probabilities = ProbabilitySource::model;
  std::size_t estimation_window = 100;
};

struct LutSpec {
  double lo = 0.0;  ///< [Hz]
  double hi = 0.0;  ///< [Hz]
  std::size_t levels = 25;
};

struct RangePosition {
  std::string channel;  ///< label of the matching channel, "none" for no target
  std::size_t count = 0;
};

struct RangefindingSpec {
  std::vector<CoincidenceChannel> channels;
  std::vector<RangePosition> positions;
  double jitter = 0.0;            ///< [s] per detector
  double histogram_bin = 10e-12;  ///< [s]
  double histogram_range = 6e-9;  ///< [s]
  double peak_half_width = 1.2e-9;
};

struct CalibrationSpec {
  double brightness = 0.0;   ///< [Hz], 0 = the configured pair rate
  double dark_signal = 0.0;  ///< [Hz] detected dark rate
  double dark_idler = 0.0;   ///< [Hz]
  std::size_t measurements = 100;
  RateMethod method = RateMethod::thermal;
  std::size_t first_n = 100;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ScenarioKind kind = ScenarioKind::detection;
  SourceSetup setup;
  std::vector<ScheduleBlock> schedule;
  bool has_jamming = false;
  NoiseWaveform jamming;
  AnalysisSpec analysis;
  LutSpec lut;
  RangefindingSpec rangefinding;
  CalibrationSpec calibration;
  SamplerOptions sampler;
  std::uint64_t seed = 1;
  double scale = 0.1;  ///< multiplier on every measurement count

  SystemParams system() const { return make_params(setup); }
  std::size_t scaled(std::size_t count) const;
};

/// Parses "6.8 MHz", "250 ps", "0.1 s" or a bare number in SI base units.
/// `unit` is "Hz" or "s". Throws Error(config_error).
double parse_quantity(const std::string& text, const std::string& unit);

/// Reads the sectioned key = value format documented in the README.
/// Errors carry the file path and the offending field.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<string>");

/// Issues that make a config unusable (empty when fine).
std::vector<std::string> check(const ScenarioConfig& config);

/// Canonical text form used for hashing and metadata.
std::string canonical_form(const ScenarioConfig& config);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace qlidar
