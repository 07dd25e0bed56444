#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "qlidar/params.hpp"

namespace qlidar {

using Rng = std::mt19937_64;

/// SplitMix64 step; also used to decorrelate per-stream seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Every measurement draws from its own engine, seeded from (base_seed,
/// stream_id). Streams are independent of evaluation order.
struct RngSeedPolicy {
  std::uint64_t base_seed = 0;

  std::uint64_t derive(std::uint64_t stream_id) const;
  Rng engine(std::uint64_t stream_id) const { return Rng(derive(stream_id)); }
};

enum class SourceKind {
  thermal_pairs,  ///< single-mode thermal pair number shared by both arms
  coherent,       ///< independent Poissonian arms (no pair correlation)
};

struct SamplerOptions {
  SourceKind source = SourceKind::thermal_pairs;
  double dead_time = 0.0;  ///< [s]; detectors are blind this long after a click
};

struct TrialRecord {
  bool idler_click = false;
  bool signal_click = false;
  std::uint64_t window_index = 0;
};

/// Photon counts landing on each detector in one window.
struct WindowPhotons {
  std::uint64_t idler = 0;
  std::uint64_t signal = 0;
};

/// Photon-level sampler for one coincidence window. The pair number is drawn
/// from the source law; each arm keeps each pair photon independently
/// (eta_i on the idler, xi*eta_s on the signal) and adds its own Poisson
/// background (eta_i*nbg_i, eta_s*nbg_s). beta and gamma play no role here.
class WindowSampler {
 public:
  explicit WindowSampler(const SystemParams& params, SamplerOptions options = {});

  WindowPhotons photons(Rng& rng);
  TrialRecord operator()(Rng& rng);

  /// Photons of the next window that receives at least one photon on either
  /// arm. `gap` is set to the number of empty windows skipped before it.
  WindowPhotons next_active(Rng& rng, std::uint64_t& gap);

  /// Probability that a window receives any photon at all.
  double active_probability() const { return p_active_; }

  const SystemParams& params() const { return params_; }
  const SamplerOptions& options() const { return options_; }

 private:
  WindowPhotons active_photons(Rng& rng);

  SystemParams params_;
  SamplerOptions options_;
  std::uint64_t window_ = 0;

  double p_pairs_ = 0.0;  // P(n >= 1)
  double p_bg_i_ = 0.0;   // P(idler background >= 1)
  double p_bg_s_ = 0.0;
  double p_active_ = 0.0;
  double mean_bg_i_ = 0.0;
  double mean_bg_s_ = 0.0;
  double keep_s_ = 0.0;

  std::geometric_distribution<std::uint64_t> extra_pairs_;
  std::poisson_distribution<std::uint64_t> bg_i_;
  std::poisson_distribution<std::uint64_t> bg_s_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

/// One window of the default thermal-pair sampler.
TrialRecord sample_window(const SystemParams& params, Rng& rng);

/// Exact per-window joint click law of the sampler.
struct JointClickLaw {
  double both = 0.0;
  double idler_only = 0.0;
  double signal_only = 0.0;
  double none = 1.0;

  double idler() const { return both + idler_only; }
  double signal() const { return both + signal_only; }
};

JointClickLaw joint_click_law(const SystemParams& params, SourceKind source = SourceKind::thermal_pairs);

struct MeasurementRecord {
  Hypothesis hypothesis = Hypothesis::h1;
  std::uint64_t signal_counts = 0;       ///< CI count x
  std::uint64_t idler_counts = 0;        ///< QI trial count k
  std::uint64_t coincidence_counts = 0;  ///< QI count x
  std::uint64_t k_ci = 0;                ///< CI trial count
  double background_estimate = 0.0;      ///< signal_counts / t_int [Hz]

  bool operator==(const MeasurementRecord&) const = default;
};

/// floor(t_int / tau_c) windows of the photon-level law. Under h0 the target
/// is removed (xi = 0). Without dead time the windows are aggregated through
/// the exact multinomial law; with dead time every active window is walked.
MeasurementRecord run_measurement(const SystemParams& params, Hypothesis hypothesis, Rng& rng,
                                  SamplerOptions options = {});

/// Counts drawn directly from the closed-form click probabilities (including
/// beta and gamma): x_ci ~ Bin(k_ci, p_ci), idler ~ Bin(k_ci, p_I),
/// coincidences ~ Bin(idler, p_qi).
MeasurementRecord sample_from_click_model(const SystemParams& params, Hypothesis hypothesis, Rng& rng);

std::vector<MeasurementRecord> run_block(const SystemParams& params, Hypothesis hypothesis,
                                         std::size_t count, const RngSeedPolicy& seeds,
                                         std::uint64_t first_stream, SamplerOptions options = {});

struct G2Estimate {
  double g2 = 0.0;
  std::uint64_t heralds = 0;
  std::uint64_t arm1 = 0;  ///< heralded clicks on HBT arm 1
  std::uint64_t arm2 = 0;
  std::uint64_t triples = 0;
};

/// Heralded g2(0) with the returning signal split 50/50 onto two detectors.
/// g2 = N_12I * N_I / (N_1I * N_2I).
///
/// Throws Error(insufficient_statistics) if no herald or either heralded arm
/// never fires.
G2Estimate estimate_g2(const SystemParams& params, Rng& rng, std::uint64_t windows,
                       SourceKind source = SourceKind::thermal_pairs);

void write_measurements_csv(std::ostream& out, const std::vector<MeasurementRecord>& records);
/// Throws Error(format_error) naming the offending line.
std::vector<MeasurementRecord> read_measurements_csv(std::istream& in);

}  // namespace qlidar
