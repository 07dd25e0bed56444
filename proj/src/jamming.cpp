#include "qlidar/jamming.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "qlidar/errors.hpp"

namespace qlidar {

std::vector<std::string> check(const NoiseWaveform& w) {
  std::vector<std::string> issues;
  if (w.mean_rate < 0.0) issues.emplace_back("mean_rate must be nonnegative");
  if (w.amplitude < 0.0) issues.emplace_back("amplitude must be nonnegative");
  if (w.white_sigma < 0.0) issues.emplace_back("white_sigma must be nonnegative");
  const bool periodic = w.kind == WaveformKind::sinusoid || w.kind == WaveformKind::composite;
  if (periodic && !(w.period > 0.0)) issues.emplace_back("period must be positive");
  if (periodic && w.amplitude > w.mean_rate) issues.emplace_back("amplitude exceeds mean_rate");
  return issues;
}

double instantaneous_rate(const NoiseWaveform& w, double t, Rng& rng) {
  double rate = w.mean_rate;
  if (w.kind == WaveformKind::sinusoid || w.kind == WaveformKind::composite) {
    rate += w.amplitude * std::sin(2.0 * M_PI * t / w.period);
  }
  if ((w.kind == WaveformKind::white || w.kind == WaveformKind::composite) && w.white_sigma > 0.0) {
    rate += std::normal_distribution<double>(0.0, w.white_sigma)(rng);
  }
  return std::max(0.0, rate);
}

std::size_t BackgroundLut::nearest(double count_rate) const {
  const auto it = std::lower_bound(levels.begin(), levels.end(), count_rate,
                                   [](const LutLevel& l, double r) { return l.count_rate < r; });
  if (it == levels.begin()) return 0;
  if (it == levels.end()) return levels.size() - 1;
  const auto hi = static_cast<std::size_t>(it - levels.begin());
  const double below = count_rate - levels[hi - 1].count_rate;
  const double above = levels[hi].count_rate - count_rate;
  return above < below ? hi : hi - 1;
}

BackgroundLut build_lut(const SystemParams& params, double lo, double hi, std::size_t n_levels) {
  if (n_levels < 2) throw Error(ErrorCode::invalid_params, "LUT needs at least 2 levels");
  if (!(hi > lo) || lo < 0.0) {
    throw Error(ErrorCode::invalid_params, "LUT range must satisfy 0 <= lo < hi");
  }
  BackgroundLut lut;
  lut.t_int = params.t_int;
  const double k = static_cast<double>(params.ci_trials());
  for (double rate : linear_grid(lo, hi, n_levels)) {
    LutLevel level;
    level.rate = rate;
    level.probs = click_probabilities(params.with_signal_background_rate(rate));
    level.count_rate = k * level.probs.p_h0_ci / params.t_int;
    level.ci = linear_coeffs(level.probs.p_h0_ci, level.probs.p_h1_ci);
    level.qi = linear_coeffs(level.probs.p_h0_qi, level.probs.p_h1_qi);
    lut.levels.push_back(level);
  }
  return lut;
}

TrackedLlv tracked_llv(const MeasurementRecord& m, const BackgroundLut& lut) {
  if (lut.levels.empty()) throw Error(ErrorCode::invalid_params, "empty LUT");
  TrackedLlv out;
  out.level = lut.nearest(static_cast<double>(m.signal_counts) / lut.t_int);
  const auto& level = lut.levels[out.level];
  out.qi = llv(m.coincidence_counts, m.idler_counts, level.qi);
  out.ci = llv(m.signal_counts, m.k_ci, level.ci);
  return out;
}

void write_lut_csv(std::ostream& out, const BackgroundLut& lut) {
  out << "level,rate_hz,p_h0_qi,p_h1_qi,M,C\n";
  char buf[256];
  for (std::size_t i = 0; i < lut.levels.size(); ++i) {
    const auto& l = lut.levels[i];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, l.rate, l.probs.p_h0_qi,
                  l.probs.p_h1_qi, l.qi.m, l.qi.c);
    out << buf;
  }
}

double SinusoidFit::amplitude() const { return std::hypot(sin_coeff, cos_coeff); }

SinusoidFit fit_sinusoid(std::span<const double> times, std::span<const double> values, double period) {
  if (times.size() != values.size() || times.size() < 3) {
    throw Error(ErrorCode::insufficient_statistics, "sinusoid fit needs at least 3 paired samples");
  }
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd y(n);
  const double w = 2.0 * M_PI / period;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = times[static_cast<std::size_t>(i)];
    a(i, 0) = 1.0;
    a(i, 1) = std::sin(w * t);
    a(i, 2) = std::cos(w * t);
    y(i) = values[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(y);
  return {c(0), c(1), c(2)};
}

}  // namespace qlidar
