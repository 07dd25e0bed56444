#include "qlidar/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "qlidar/click_model.hpp"
#include "qlidar/errors.hpp"

namespace qlidar {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t RngSeedPolicy::derive(std::uint64_t stream_id) const {
  std::uint64_t state = base_seed;
  const std::uint64_t mixed = splitmix64(state) ^ stream_id;
  state = mixed;
  splitmix64(state);
  return splitmix64(state);
}

namespace {

std::uint64_t thin(std::uint64_t n, double keep, Rng& rng) {
  if (n == 0 || keep <= 0.0) return 0;
  if (keep >= 1.0) return n;
  if (n > 32) return std::binomial_distribution<std::uint64_t>(n, keep)(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uint64_t kept = 0;
  for (std::uint64_t i = 0; i < n; ++i) kept += unit(rng) < keep;
  return kept;
}

// Poisson conditioned on at least one event.
std::uint64_t positive_poisson(double mean, Rng& rng) {
  if (mean > 1.0) {
    std::poisson_distribution<std::uint64_t> dist(mean);
    for (;;) {
      const auto k = dist(rng);
      if (k > 0) return k;
    }
  }
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double term = mean / std::expm1(mean);
  std::uint64_t k = 1;
  while (u > term && k < 64) {
    u -= term;
    ++k;
    term *= mean / static_cast<double>(k);
  }
  return k;
}

template <class Dist>
std::uint64_t draw_or_zero(Dist& dist, double mean, Rng& rng) {
  return mean > 0.0 ? dist(rng) : 0;
}

}  // namespace

WindowSampler::WindowSampler(const SystemParams& params, SamplerOptions options)
    : params_(params), options_(options) {
  mean_bg_i_ = params.eta_i * params.nbg_i;
  mean_bg_s_ = params.eta_s * params.nbg_s;
  keep_s_ = params.xi * params.eta_s;
  if (options.source == SourceKind::coherent) {
    // Independent Poissonian arms are indistinguishable from extra background.
    mean_bg_i_ += params.n_mean * params.eta_i;
    mean_bg_s_ += params.n_mean * keep_s_;
  } else {
    p_pairs_ = params.n_mean / (1.0 + params.n_mean);
    extra_pairs_ = std::geometric_distribution<std::uint64_t>(1.0 / (1.0 + params.n_mean));
  }
  p_bg_i_ = -std::expm1(-mean_bg_i_);
  p_bg_s_ = -std::expm1(-mean_bg_s_);
  p_active_ = -std::expm1(std::log1p(-p_pairs_) - mean_bg_i_ - mean_bg_s_);
  if (mean_bg_i_ > 0.0) bg_i_ = std::poisson_distribution<std::uint64_t>(mean_bg_i_);
  if (mean_bg_s_ > 0.0) bg_s_ = std::poisson_distribution<std::uint64_t>(mean_bg_s_);
}

WindowPhotons WindowSampler::photons(Rng& rng) {
  std::uint64_t pairs = 0;
  if (p_pairs_ > 0.0 && unit_(rng) < p_pairs_) pairs = 1 + extra_pairs_(rng);
  return {thin(pairs, params_.eta_i, rng) + draw_or_zero(bg_i_, mean_bg_i_, rng),
          thin(pairs, keep_s_, rng) + draw_or_zero(bg_s_, mean_bg_s_, rng)};
}

TrialRecord WindowSampler::operator()(Rng& rng) {
  const auto ph = photons(rng);
  return {ph.idler > 0, ph.signal > 0, window_++};
}

WindowPhotons WindowSampler::active_photons(Rng& rng) {
  // Split "something arrived" by the first nonzero source in the order
  // (pairs, idler background, signal background).
  const double u = unit_(rng) * p_active_;
  const double p_idler_first = (1.0 - p_pairs_) * p_bg_i_;
  std::uint64_t pairs = 0;
  std::uint64_t bg_i = 0;
  std::uint64_t bg_s = 0;
  if (u < p_pairs_) {
    pairs = 1 + extra_pairs_(rng);
    bg_i = draw_or_zero(bg_i_, mean_bg_i_, rng);
    bg_s = draw_or_zero(bg_s_, mean_bg_s_, rng);
  } else if (u < p_pairs_ + p_idler_first) {
    bg_i = positive_poisson(mean_bg_i_, rng);
    bg_s = draw_or_zero(bg_s_, mean_bg_s_, rng);
  } else {
    bg_s = positive_poisson(mean_bg_s_, rng);
  }
  return {thin(pairs, params_.eta_i, rng) + bg_i, thin(pairs, keep_s_, rng) + bg_s};
}

WindowPhotons WindowSampler::next_active(Rng& rng, std::uint64_t& gap) {
  if (!(p_active_ > 0.0)) {
    gap = std::numeric_limits<std::uint64_t>::max();
    return {};
  }
  gap = p_active_ < 1.0 ? std::geometric_distribution<std::uint64_t>(p_active_)(rng) : 0;
  window_ += gap + 1;
  return active_photons(rng);
}

TrialRecord sample_window(const SystemParams& params, Rng& rng) {
  WindowSampler sampler(params);
  return sampler(rng);
}

JointClickLaw joint_click_law(const SystemParams& p, SourceKind source) {
  const double c = p.eta_i * p.nbg_i;
  const double b = p.eta_s * p.nbg_s;
  const double s = p.xi * p.eta_s;
  double no_idler = 0.0;
  double no_signal = 0.0;
  double none = 0.0;
  double idler = 0.0;
  if (source == SourceKind::coherent) {
    const double ci = c + p.n_mean * p.eta_i;
    const double bs = b + p.n_mean * s;
    no_idler = std::exp(-ci);
    no_signal = std::exp(-bs);
    none = std::exp(-ci - bs);
    idler = -std::expm1(-ci);
  } else {
    const double x = p.n_mean * p.eta_i;
    no_idler = std::exp(-c) / (1.0 + x);
    no_signal = std::exp(-b) / (1.0 + p.n_mean * s);
    none = std::exp(-b - c) / (1.0 + p.n_mean * (p.eta_i + s - p.eta_i * s));
    idler = (x - std::expm1(-c)) / (1.0 + x);
  }
  JointClickLaw law;
  law.idler_only = std::max(0.0, no_signal - none);
  law.signal_only = std::max(0.0, no_idler - none);
  law.both = std::max(0.0, idler - law.idler_only);
  law.none = none;
  return law;
}

namespace {

std::uint64_t binomial(std::uint64_t n, double p, Rng& rng) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<std::uint64_t>(n, p)(rng);
}

MeasurementRecord walk_windows(const SystemParams& params, std::uint64_t k, SamplerOptions options,
                               Rng& rng) {
  WindowSampler sampler(params, options);
  // Windows a detector stays blind after clicking (non-paralysable).
  const auto blind = static_cast<std::uint64_t>(std::ceil(options.dead_time / params.tau_c - 1e-9));
  constexpr auto kNever = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t last_i = kNever;
  std::uint64_t last_s = kNever;
  auto ready = [blind](std::uint64_t last, std::uint64_t idx) {
    return last == kNever || idx - last >= blind;
  };

  MeasurementRecord rec;
  std::uint64_t idx = 0;
  bool first = true;
  for (;;) {
    std::uint64_t gap = 0;
    const auto ph = sampler.next_active(rng, gap);
    if (gap >= k) break;
    idx += gap + (first ? 0 : 1);
    first = false;
    if (idx >= k) break;
    const bool idler = ph.idler > 0 && ready(last_i, idx);
    const bool signal = ph.signal > 0 && ready(last_s, idx);
    if (idler) last_i = idx;
    if (signal) last_s = idx;
    rec.idler_counts += idler;
    rec.signal_counts += signal;
    rec.coincidence_counts += idler && signal;
  }
  return rec;
}

}  // namespace

MeasurementRecord run_measurement(const SystemParams& params, Hypothesis hypothesis, Rng& rng,
                                  SamplerOptions options) {
  const SystemParams p = hypothesis == Hypothesis::h0 ? params.with_xi(0.0) : params;
  const std::uint64_t k = p.ci_trials();
  MeasurementRecord rec;
  if (options.dead_time > 0.0) {
    rec = walk_windows(p, k, options, rng);
  } else {
    const auto law = joint_click_law(p, options.source);
    const std::uint64_t both = binomial(k, law.both, rng);
    std::uint64_t rest = k - both;
    double remaining = 1.0 - law.both;
    const std::uint64_t idler_only = binomial(rest, law.idler_only / remaining, rng);
    rest -= idler_only;
    remaining -= law.idler_only;
    const std::uint64_t signal_only = binomial(rest, law.signal_only / remaining, rng);
    rec.coincidence_counts = both;
    rec.idler_counts = both + idler_only;
    rec.signal_counts = both + signal_only;
  }
  rec.hypothesis = hypothesis;
  rec.k_ci = k;
  rec.background_estimate = static_cast<double>(rec.signal_counts) / p.t_int;
  return rec;
}

MeasurementRecord sample_from_click_model(const SystemParams& params, Hypothesis hypothesis, Rng& rng) {
  const auto probs = click_probabilities(params);
  const bool present = hypothesis == Hypothesis::h1;
  MeasurementRecord rec;
  rec.hypothesis = hypothesis;
  rec.k_ci = params.ci_trials();
  rec.signal_counts = binomial(rec.k_ci, present ? probs.p_h1_ci : probs.p_h0_ci, rng);
  rec.idler_counts = binomial(rec.k_ci, probs.p_idler, rng);
  rec.coincidence_counts = binomial(rec.idler_counts, present ? probs.p_h1_qi : probs.p_h0_qi, rng);
  // The two marginals are drawn independently; keep the record consistent.
  rec.signal_counts = std::max(rec.signal_counts, rec.coincidence_counts);
  rec.background_estimate = static_cast<double>(rec.signal_counts) / params.t_int;
  return rec;
}

std::vector<MeasurementRecord> run_block(const SystemParams& params, Hypothesis hypothesis,
                                         std::size_t count, const RngSeedPolicy& seeds,
                                         std::uint64_t first_stream, SamplerOptions options) {
  std::vector<MeasurementRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = seeds.engine(first_stream + i);
    out.push_back(run_measurement(params, hypothesis, rng, options));
  }
  return out;
}

G2Estimate estimate_g2(const SystemParams& params, Rng& rng, std::uint64_t windows, SourceKind source) {
  WindowSampler sampler(params, {source, 0.0});
  G2Estimate est;
  std::uint64_t idx = 0;
  bool first = true;
  for (;;) {
    std::uint64_t gap = 0;
    const auto ph = sampler.next_active(rng, gap);
    if (gap >= windows) break;
    idx += gap + (first ? 0 : 1);
    first = false;
    if (idx >= windows) break;
    if (ph.idler == 0) continue;
    const std::uint64_t to_arm1 = thin(ph.signal, 0.5, rng);
    const bool arm1 = to_arm1 > 0;
    const bool arm2 = ph.signal - to_arm1 > 0;
    ++est.heralds;
    est.arm1 += arm1;
    est.arm2 += arm2;
    est.triples += arm1 && arm2;
  }
  if (est.heralds == 0 || est.arm1 == 0 || est.arm2 == 0) {
    throw Error(ErrorCode::insufficient_statistics,
                "heralds=" + std::to_string(est.heralds) + " arm1=" + std::to_string(est.arm1) +
                    " arm2=" + std::to_string(est.arm2) + " over " + std::to_string(windows) +
                    " windows");
  }
  est.g2 = static_cast<double>(est.triples) * static_cast<double>(est.heralds) /
           (static_cast<double>(est.arm1) * static_cast<double>(est.arm2));
  return est;
}

namespace {

constexpr const char* kMeasurementHeader =
    "hypothesis,signal_counts,idler_counts,coincidence_counts,k_ci,background_estimate";

}  // namespace

void write_measurements_csv(std::ostream& out, const std::vector<MeasurementRecord>& records) {
  out << kMeasurementHeader << '\n';
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.background_estimate);
    out << to_string(r.hypothesis) << ',' << r.signal_counts << ',' << r.idler_counts << ','
        << r.coincidence_counts << ',' << r.k_ci << ',' << buf << '\n';
  }
}

std::vector<MeasurementRecord> read_measurements_csv(std::istream& in) {
  std::vector<MeasurementRecord> out;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) return out;
  ++line_no;
  if (line != kMeasurementHeader) {
    throw Error(ErrorCode::format_error, "line 1: unexpected header '" + line + "'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field[6];
    int n = 0;
    while (n < 6 && std::getline(row, field[n], ',')) ++n;
    try {
      if (n != 6) throw std::invalid_argument("expected 6 fields");
      MeasurementRecord r;
      if (field[0] == "H1") {
        r.hypothesis = Hypothesis::h1;
      } else if (field[0] == "H0") {
        r.hypothesis = Hypothesis::h0;
      } else {
        throw std::invalid_argument("bad hypothesis '" + field[0] + "'");
      }
      r.signal_counts = std::stoull(field[1]);
      r.idler_counts = std::stoull(field[2]);
      r.coincidence_counts = std::stoull(field[3]);
      r.k_ci = std::stoull(field[4]);
      r.background_estimate = std::stod(field[5]);
      out.push_back(r);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::format_error, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace qlidar
