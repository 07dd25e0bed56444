#include "qlidar/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "qlidar/calibration.hpp"
#include "qlidar/click_model.hpp"
#include "qlidar/errors.hpp"
#include "qlidar/jamming.hpp"
#include "qlidar/llv.hpp"
#include "qlidar/timetag.hpp"

namespace qlidar {

std::string library_version() { return QLIDAR_VERSION; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum Purpose : std::uint64_t { kMeasure = 1, kWave = 2, kReference = 3, kCalibration = 4 };

std::uint64_t stream_id(Purpose purpose, std::uint64_t block, std::uint64_t index) {
  return (static_cast<std::uint64_t>(purpose) << 56) ^ (block << 32) ^ index;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json base_metadata(const ScenarioConfig& c) {
  return {{"scenario", to_string(c.kind)},
          {"name", c.name},
          {"config_hash", hex(fnv1a(canonical_form(c)))},
          {"seed", c.seed},
          {"version", library_version()},
          {"n_av", c.analysis.n_av},
          {"threshold", c.analysis.threshold},
          {"t_int", c.setup.t_int},
          {"scale", c.scale}};
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

std::vector<double> column_of(const MeasurementTable& t, double MeasurementRow::*field) {
  std::vector<double> v;
  v.reserve(t.rows.size());
  for (const auto& r : t.rows) v.push_back(r.*field);
  return v;
}

std::vector<double> extra_of(const MeasurementTable& t, std::size_t col) {
  std::vector<double> v;
  v.reserve(t.rows.size());
  for (const auto& r : t.rows) v.push_back(r.extra[col]);
  return v;
}

void fill_averages(MeasurementTable& t, std::size_t n_av) {
  const auto block = extra_of(t, t.column("block"));
  const auto ci = blockwise_rolling(column_of(t, &MeasurementRow::llv_ci), block, n_av);
  const auto qi = blockwise_rolling(column_of(t, &MeasurementRow::llv_qi), block, n_av);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    t.rows[i].llv_ci_avg = ci[i];
    t.rows[i].llv_qi_avg = qi[i];
  }
}

MeasurementRow row_from(std::size_t index, const MeasurementRecord& m, const LinearLlvCoeffs& ci,
                        const LinearLlvCoeffs& qi) {
  MeasurementRow r;
  r.index = index;
  r.hypothesis = m.hypothesis;
  r.x = m.coincidence_counts;
  r.k = m.idler_counts;
  r.llv_ci = llv(m.signal_counts, m.k_ci, ci);
  r.llv_qi = llv(m.coincidence_counts, m.idler_counts, qi);
  return r;
}

struct AnalyticPhi {
  double phi = 0.0;
  double p_d = 0.0;
  double p_fa = 0.0;
};

AnalyticPhi analytic_phi(const SystemParams& p, Illumination mode, std::size_t n_av, double threshold) {
  const auto a = analytic_distributions(p, mode, n_av);
  const auto r = analytic_pd_pfa(a.h1, a.h0, threshold);
  return {r.distinguishability(), r.p_d, r.p_fa};
}

nlohmann::json phi_json(const AnalyticPhi& a) { return {{"phi", a.phi}, {"p_d", a.p_d}, {"p_fa", a.p_fa}}; }

// Split the llv column of `t` by hypothesis, skipping NaN.
std::pair<LlvSeries, LlvSeries> by_hypothesis(const MeasurementTable& t, const std::vector<double>& values) {
  LlvSeries h1, h0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (std::isnan(values[i])) continue;
    (t.rows[i].hypothesis == Hypothesis::h1 ? h1 : h0).values.push_back(values[i]);
  }
  return {h1, h0};
}

double empirical_phi_or_nan(const std::pair<LlvSeries, LlvSeries>& s, double threshold) {
  if (s.first.empty() || s.second.empty()) return kNaN;
  return empirical_distinguishability(s.first, s.second, threshold);
}

HypothesisProbs empirical_probs(const std::vector<MeasurementRecord>& h1, const std::vector<MeasurementRecord>& h0,
                                std::size_t window, bool quantum) {
  auto freq = [&](const std::vector<MeasurementRecord>& ms) {
    double hits = 0.0, trials = 0.0;
    for (std::size_t i = 0; i < ms.size() && i < window; ++i) {
      hits += static_cast<double>(quantum ? ms[i].coincidence_counts : ms[i].signal_counts);
      trials += static_cast<double>(quantum ? ms[i].idler_counts : ms[i].k_ci);
    }
    return trials > 0.0 ? hits / trials : kNaN;
  };
  return {freq(h0), freq(h1)};
}

}  // namespace

RunReport run_detection_scenario(const ScenarioConfig& cfg) {
  const SystemParams params = cfg.system();
  require_valid(params);
  const RngSeedPolicy seeds{cfg.seed};
  const auto& an = cfg.analysis;

  std::vector<std::vector<MeasurementRecord>> blocks;
  std::vector<MeasurementRecord> first_h1, first_h0;
  for (std::size_t b = 0; b < cfg.schedule.size(); ++b) {
    const auto& blk = cfg.schedule[b];
    std::vector<MeasurementRecord> recs;
    const std::size_t n = cfg.scaled(blk.count);
    recs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto rng = seeds.engine(stream_id(kMeasure, b, i));
      recs.push_back(run_measurement(params, blk.hypothesis, rng, cfg.sampler));
    }
    auto& first = blk.hypothesis == Hypothesis::h1 ? first_h1 : first_h0;
    first.insert(first.end(), recs.begin(), recs.end());
    blocks.push_back(std::move(recs));
  }

  const auto model = click_probabilities(params);
  HypothesisProbs ci{model.p_h0_ci, model.p_h1_ci};
  HypothesisProbs qi{model.p_h0_qi, model.p_h1_qi};
  if (an.probabilities == ProbabilitySource::empirical) {
    if (first_h1.empty() || first_h0.empty()) {
      throw Error(ErrorCode::config_error, "empirical probabilities need both H1 and H0 blocks");
    }
    ci = empirical_probs(first_h1, first_h0, an.estimation_window, false);
    qi = empirical_probs(first_h1, first_h0, an.estimation_window, true);
  }
  const auto ci_coeffs = linear_coeffs(ci.h0, ci.h1);
  const auto qi_coeffs = linear_coeffs(qi.h0, qi.h1);

  RunReport rep;
  rep.scenario = "detection";
  auto& t = rep.measurements;
  t.extra_columns = {"block", "x_ci", "k_ci"};
  std::size_t index = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (const auto& m : blocks[b]) {
      auto r = row_from(index++, m, ci_coeffs, qi_coeffs);
      r.extra = {static_cast<double>(b), static_cast<double>(m.signal_counts), static_cast<double>(m.k_ci)};
      t.rows.push_back(std::move(r));
    }
  }
  fill_averages(t, an.n_av);

  rep.metadata = base_metadata(cfg);
  rep.summary["empirical"] = empirical_summary(t, rep.metadata);

  nlohmann::json model_j;
  model_j["probabilities"] = {{"p_h0_ci", ci.h0}, {"p_h1_ci", ci.h1}, {"p_h0_qi", qi.h0}, {"p_h1_qi", qi.h1},
                              {"p_idler", model.p_idler}, {"n_cond", model.n_cond},
                              {"source", an.probabilities == ProbabilitySource::model ? "model" : "empirical"}};
  model_j["coefficients"] = {{"ci", {{"M", ci_coeffs.m}, {"C", ci_coeffs.c}}},
                             {"qi", {{"M", qi_coeffs.m}, {"C", qi_coeffs.c}}}};
  model_j["qi_single"] = phi_json(analytic_phi(params, Illumination::quantum, 1, an.threshold));
  model_j["ci_single"] = phi_json(analytic_phi(params, Illumination::classical, 1, an.threshold));
  model_j["qi_avg"] = phi_json(analytic_phi(params, Illumination::quantum, an.n_av, an.threshold));
  model_j["ci_avg"] = phi_json(analytic_phi(params, Illumination::classical, an.n_av, an.threshold));
  try {
    model_j["equivalent_averaging_factor"] = equivalent_averaging_factor(params, params, an.n_av, an.roc_points);
  } catch (const Error& e) {
    model_j["equivalent_averaging_factor"] = nullptr;
    model_j["equivalent_averaging_error"] = e.what();
  }
  const auto quiet = click_probabilities(params.with_signal_background_rate(0.0));
  const double herald_rate = model.p_idler / params.tau_c;
  model_j["coincidence_rate_noise_off_hz"] = herald_rate * quiet.p_h1_qi;
  model_j["accidental_rate_hz"] = herald_rate * model.p_h0_qi;
  model_j["snr_qi"] = quiet.p_h1_qi / model.p_h0_qi;
  model_j["snr_ci"] = (model.p_h1_ci - model.p_h0_ci) / model.p_h0_ci;
  model_j["signal_rate_hz"] = (model.p_h1_ci - model.p_h0_ci) / params.tau_c;
  rep.summary["model"] = model_j;

  // phi against N_av
  NumericTable sweep;
  sweep.columns = {"n_av", "phi_qi", "phi_ci", "phi_qi_model", "phi_ci_model"};
  const auto block = extra_of(t, t.column("block"));
  const auto llv_qi = column_of(t, &MeasurementRow::llv_qi);
  const auto llv_ci = column_of(t, &MeasurementRow::llv_ci);
  for (std::size_t n : an.n_av_sweep) {
    if (n == 0) continue;
    const double eq = empirical_phi_or_nan(by_hypothesis(t, blockwise_rolling(llv_qi, block, n)), an.threshold);
    const double ec = empirical_phi_or_nan(by_hypothesis(t, blockwise_rolling(llv_ci, block, n)), an.threshold);
    sweep.rows.push_back({static_cast<double>(n), eq, ec,
                          analytic_phi(params, Illumination::quantum, n, an.threshold).phi,
                          analytic_phi(params, Illumination::classical, n, an.threshold).phi});
  }
  rep.tables["phi_vs_nav"] = sweep;

  for (bool quantum : {true, false}) {
    const auto a = analytic_distributions(params, quantum ? Illumination::quantum : Illumination::classical, an.n_av);
    const auto grid = threshold_grid(a.h1, a.h0, an.roc_points);
    const auto roc = roc_curve(a.h1, a.h0, grid);
    const auto series = by_hypothesis(t, quantum ? column_of(t, &MeasurementRow::llv_qi_avg)
                                                 : column_of(t, &MeasurementRow::llv_ci_avg));
    NumericTable table;
    table.columns = {"threshold", "p_fa", "p_d", "p_fa_empirical", "p_d_empirical"};
    const bool have = !series.first.empty() && !series.second.empty();
    for (const auto& pt : roc.points) {
      DetectionRates e{kNaN, kNaN};
      if (have) e = empirical_rates(series.first, series.second, pt.threshold);
      table.rows.push_back({pt.threshold, pt.p_fa, pt.p_d, e.p_fa, e.p_d});
    }
    rep.tables[quantum ? "roc_qi" : "roc_ci"] = table;
  }
  return rep;
}

RunReport run_jamming_scenario(const ScenarioConfig& cfg) {
  const SystemParams params = cfg.system();
  require_valid(params);
  const RngSeedPolicy seeds{cfg.seed};
  const auto& an = cfg.analysis;
  const auto& wf = cfg.jamming;
  const double ambient = cfg.setup.signal_background_rate;
  const SystemParams mean_params = params.with_signal_background_rate(ambient + wf.mean_rate);

  const auto stat = click_probabilities(mean_params);
  const auto ci_coeffs = linear_coeffs(stat.p_h0_ci, stat.p_h1_ci);
  const auto qi_coeffs = linear_coeffs(stat.p_h0_qi, stat.p_h1_qi);
  const auto lut = build_lut(params, cfg.lut.lo, cfg.lut.hi, cfg.lut.levels);

  RunReport rep;
  rep.scenario = "jamming";
  auto& t = rep.measurements;
  t.extra_columns = {"block", "static", "time", "background_hz", "x_ci", "k_ci",
                     "llv_qi_tracked", "llv_qi_tracked_avg", "lut_level"};
  std::size_t index = 0;
  std::size_t block_id = 0;
  for (int reference = 0; reference < 2; ++reference) {
    for (std::size_t b = 0; b < cfg.schedule.size(); ++b, ++block_id) {
      const auto& blk = cfg.schedule[b];
      const std::size_t n = cfg.scaled(blk.count);
      for (std::size_t i = 0; i < n; ++i) {
        const double time = static_cast<double>(i) * params.t_int;
        double rate = ambient + wf.mean_rate;
        if (!reference) {
          auto wave_rng = seeds.engine(stream_id(kWave, b, i));
          rate = ambient + instantaneous_rate(wf, time, wave_rng);
        }
        auto rng = seeds.engine(stream_id(reference ? kReference : kMeasure, b, i));
        const auto m = run_measurement(params.with_signal_background_rate(rate), blk.hypothesis, rng, cfg.sampler);
        auto r = row_from(index++, m, ci_coeffs, qi_coeffs);
        const auto tr = tracked_llv(m, lut);
        r.extra = {static_cast<double>(block_id), static_cast<double>(reference), time, rate,
                   static_cast<double>(m.signal_counts), static_cast<double>(m.k_ci), tr.qi, kNaN,
                   static_cast<double>(tr.level)};
        t.rows.push_back(std::move(r));
      }
    }
  }
  fill_averages(t, an.n_av);
  {
    const std::size_t col = t.column("llv_qi_tracked");
    const auto avg = blockwise_rolling(extra_of(t, col), extra_of(t, t.column("block")), an.n_av);
    const std::size_t out = t.column("llv_qi_tracked_avg");
    for (std::size_t i = 0; i < t.rows.size(); ++i) t.rows[i].extra[out] = avg[i];
  }

  rep.metadata = base_metadata(cfg);
  rep.metadata["period"] = wf.period;
  rep.summary["empirical"] = empirical_summary(t, rep.metadata);

  nlohmann::json model_j;
  model_j["static_background_hz"] = ambient + wf.mean_rate;
  model_j["qi_single"] = phi_json(analytic_phi(mean_params, Illumination::quantum, 1, an.threshold));
  model_j["qi_avg"] = phi_json(analytic_phi(mean_params, Illumination::quantum, an.n_av, an.threshold));
  model_j["ci_single"] = phi_json(analytic_phi(mean_params, Illumination::classical, 1, an.threshold));
  model_j["lut"] = {{"lo_hz", cfg.lut.lo}, {"hi_hz", cfg.lut.hi}, {"levels", cfg.lut.levels}};
  rep.summary["model"] = model_j;

  std::ostringstream lut_csv;
  write_lut_csv(lut_csv, lut);
  rep.files["lut.csv"] = lut_csv.str();
  return rep;
}

double capture_fraction(double offset, double window, double sigma) {
  if (!(sigma > 0.0)) return std::abs(offset) <= 0.5 * window ? 1.0 : 0.0;
  return normal_upper_tail((-0.5 * window - offset) / sigma) - normal_upper_tail((0.5 * window - offset) / sigma);
}

SystemParams channel_params(const SystemParams& system, double window, double offset, double relative_sigma) {
  SystemParams p = system.with_tau_c(window);
  p.xi *= capture_fraction(offset, window, relative_sigma);
  return p;
}

RunReport run_rangefinding_scenario(const ScenarioConfig& cfg) {
  const SystemParams params = cfg.system();
  require_valid(params);
  const RngSeedPolicy seeds{cfg.seed};
  const auto& an = cfg.analysis;
  const auto& rf = cfg.rangefinding;
  const double ambient = cfg.setup.signal_background_rate;
  const double jam_mean = cfg.has_jamming ? cfg.jamming.mean_rate : 0.0;
  const double rel_sigma = std::sqrt(2.0) * rf.jitter;
  const SystemParams mean_params = params.with_signal_background_rate(ambient + jam_mean);
  const double t_int = params.t_int;

  std::vector<LinearLlvCoeffs> ci_coeffs, qi_coeffs;
  nlohmann::json channel_model = nlohmann::json::array();
  for (const auto& ch : rf.channels) {
    const auto cp = channel_params(mean_params, ch.window, 0.0, rel_sigma);
    const auto ci = ci_click_probs(cp);
    const auto qi = qi_click_probs(cp);
    ci_coeffs.push_back(linear_coeffs(ci.h0, ci.h1));
    qi_coeffs.push_back(linear_coeffs(qi.h0, qi.h1));
    channel_model.push_back({{"label", ch.label}, {"delay", ch.delay}, {"window", ch.window},
                             {"capture", capture_fraction(0.0, ch.window, rel_sigma)},
                             {"p_h0_qi", qi.h0}, {"p_h1_qi", qi.h1}, {"M", qi_coeffs.back().m},
                             {"C", qi_coeffs.back().c}});
  }
  auto channel_index = [&](const std::string& label) -> int {
    for (std::size_t i = 0; i < rf.channels.size(); ++i) {
      if (rf.channels[i].label == label) return static_cast<int>(i);
    }
    return -1;
  };

  RunReport rep;
  rep.scenario = "rangefinding";
  auto& t = rep.measurements;
  t.extra_columns = {"block", "channel", "position", "measurement", "time", "x_ci"};
  nlohmann::json peaks = nlohmann::json::array();
  std::size_t index = 0;
  std::size_t global = 0;
  for (std::size_t b = 0; b < rf.positions.size(); ++b) {
    const auto& pos = rf.positions[b];
    const int target = channel_index(pos.channel);
    const double delay = target >= 0 ? rf.channels[static_cast<std::size_t>(target)].delay : 0.0;
    DelayHistogram hist;
    const std::size_t n = cfg.scaled(pos.count);
    for (std::size_t i = 0; i < n; ++i, ++global) {
      const double t0 = static_cast<double>(global) * t_int;
      double jam = 0.0;
      if (cfg.has_jamming) {
        auto wave_rng = seeds.engine(stream_id(kWave, b, i));
        jam = instantaneous_rate(cfg.jamming, t0, wave_rng);
      }
      SystemParams p = params.with_signal_background_rate(ambient + jam);
      if (target < 0) p.xi = 0.0;
      auto rng = seeds.engine(stream_id(kMeasure, b, i));
      const auto stream = generate_stream(p, delay, {rf.jitter}, t_int, rng, t0);
      const auto counts = count_coincidences(stream, rf.channels, {t_int, t0, 1});
      const auto h = delay_histogram(stream, 0.0, rf.histogram_range, rf.histogram_bin);
      if (hist.counts.empty()) {
        hist = h;
      } else {
        for (std::size_t k = 0; k < h.counts.size(); ++k) hist.counts[k] += h.counts[k];
      }
      for (std::size_t c = 0; c < rf.channels.size(); ++c) {
        auto m = counts[c][0];
        m.hypothesis = static_cast<int>(c) == target ? Hypothesis::h1 : Hypothesis::h0;
        auto r = row_from(index++, m, ci_coeffs[c], qi_coeffs[c]);
        r.extra = {static_cast<double>(b), static_cast<double>(c), static_cast<double>(target),
                   static_cast<double>(global), t0, static_cast<double>(m.signal_counts)};
        t.rows.push_back(std::move(r));
      }
    }
    const std::string name = "histogram_" + std::to_string(b) + "_" + pos.channel + ".csv";
    std::ostringstream hcsv;
    write_histogram_csv(hcsv, hist);
    rep.files[name] = hcsv.str();
    const auto peak = estimate_peak(hist, rf.peak_half_width);
    peaks.push_back({{"block", b}, {"position", pos.channel}, {"true_delay_ps", delay * 1e12},
                     {"center_ps", peak.center * 1e12}, {"sigma_ps", peak.sigma * 1e12},
                     {"baseline", peak.baseline}, {"area", peak.area}});
  }

  // Rolling averages per (block, channel); rows interleave channels.
  const std::size_t n_ch = rf.channels.size();
  for (std::size_t c = 0; c < n_ch; ++c) {
    std::vector<std::size_t> rows;
    std::vector<double> qi, ci, block;
    for (std::size_t i = c; i < t.rows.size(); i += n_ch) {
      rows.push_back(i);
      qi.push_back(t.rows[i].llv_qi);
      ci.push_back(t.rows[i].llv_ci);
      block.push_back(t.rows[i].extra[0]);
    }
    const auto qa = blockwise_rolling(qi, block, an.n_av);
    const auto ca = blockwise_rolling(ci, block, an.n_av);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      t.rows[rows[j]].llv_qi_avg = qa[j];
      t.rows[rows[j]].llv_ci_avg = ca[j];
    }
  }

  rep.metadata = base_metadata(cfg);
  std::vector<std::string> labels;
  for (const auto& ch : rf.channels) labels.push_back(ch.label);
  rep.metadata["channels"] = labels;
  rep.summary["empirical"] = empirical_summary(t, rep.metadata);
  nlohmann::json model_j;
  model_j["channels"] = channel_model;
  model_j["relative_jitter_ps"] = rel_sigma * 1e12;
  model_j["peaks"] = peaks;
  rep.summary["model"] = model_j;
  return rep;
}

RunReport run_calibration(const ScenarioConfig& cfg) {
  const auto& cal = cfg.calibration;
  const SourceSetup truth_setup = cfg.setup;
  const SystemParams truth = cfg.system();
  require_valid(truth);
  const RngSeedPolicy seeds{cfg.seed};
  const double brightness = cal.brightness > 0.0 ? cal.brightness : truth_setup.pair_rate;

  SourceSetup dark_setup = truth_setup;
  dark_setup.signal_background_rate = cal.dark_signal;
  dark_setup.idler_background_rate = cal.dark_idler;
  SourceSetup blocked = dark_setup;
  blocked.pair_rate = 0.0;
  SourceSetup unfiltered = dark_setup;
  unfiltered.loss_db = 0.0;

  struct Plan {
    CalibrationConfig config;
    SystemParams params;
    Hypothesis hypothesis;
  };
  const std::vector<Plan> plans = {
      {CalibrationConfig::noise_only, make_params(blocked), Hypothesis::h1},
      {CalibrationConfig::source_only, make_params(unfiltered), Hypothesis::h1},
      {CalibrationConfig::target_present, make_params(dark_setup), Hypothesis::h1},
      {CalibrationConfig::source_only, make_params(unfiltered), Hypothesis::h1},
      {CalibrationConfig::target_absent, truth, Hypothesis::h0},
      {CalibrationConfig::target_present, truth, Hypothesis::h1},
  };
  std::vector<CalibrationRun> runs;
  for (std::size_t r = 0; r < plans.size(); ++r) {
    CalibrationRun run{plans[r].config, {}, truth.t_int, truth.tau_c};
    for (std::size_t i = 0; i < cal.measurements; ++i) {
      auto rng = seeds.engine(stream_id(kCalibration, r, i));
      run.measurements.push_back(run_measurement(plans[r].params, plans[r].hypothesis, rng, cfg.sampler));
    }
    runs.push_back(std::move(run));
  }
  const auto& dark = runs[0];

  const auto eff = estimate_efficiencies(runs[1], brightness, cal.method, &dark);
  const auto xi = estimate_reflectivity(runs[2], runs[3], dark, cal.method);

  SystemParams fit_params = truth;
  fit_params.eta_s = eff.eta_s.value;
  fit_params.eta_i = eff.eta_i.value;
  fit_params.xi = xi.value;
  fit_params.n_mean = brightness * truth.tau_c;
  fit_params.beta = 1.0;
  fit_params.gamma = 1.0;
  {
    // Idler background from the target-absent run's idler click frequency.
    const double p = static_cast<double>(runs[4].idler_counts()) / static_cast<double>(runs[4].windows());
    const double c = -std::log1p(-p) - std::log1p(fit_params.n_mean * fit_params.eta_i);
    fit_params.nbg_i = std::max(0.0, c) / fit_params.eta_i;
  }
  const auto shape = fit_shape_params(runs[4], runs[5], fit_params, cal.first_n);

  const std::string method = to_string(cal.method);
  const std::vector<CalibrationEntry> entries = {
      {"eta_s", eff.eta_s, "source-only rate / brightness (" + method + ")"},
      {"eta_i", eff.eta_i, "source-only rate / brightness (" + method + ")"},
      {"xi", xi, "filtered / unfiltered net signal rate (" + method + ")"},
      {"gamma", shape.gamma, "match CI single-shot click frequency"},
      {"beta", shape.beta, "match QI heralded click frequency"},
  };
  const std::vector<double> truths = {truth_setup.eta_s, truth_setup.eta_i,
                                      loss_db_to_transmission(truth_setup.loss_db), 1.0, 1.0};

  RunReport rep;
  rep.scenario = "calibration";
  auto& t = rep.measurements;
  t.extra_columns = {"run", "x_ci", "k_ci"};
  std::size_t index = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const auto& m : runs[r].measurements) {
      MeasurementRow row;
      row.index = index++;
      row.hypothesis = m.hypothesis;
      row.x = m.coincidence_counts;
      row.k = m.idler_counts;
      row.llv_ci = row.llv_qi = row.llv_ci_avg = row.llv_qi_avg = kNaN;
      row.extra = {static_cast<double>(r), static_cast<double>(m.signal_counts), static_cast<double>(m.k_ci)};
      t.rows.push_back(std::move(row));
    }
  }
  rep.metadata = base_metadata(cfg);
  rep.summary["empirical"] = empirical_summary(t, rep.metadata);
  nlohmann::json fit = nlohmann::json::object();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const double z = e.estimate.error > 0.0 ? (e.estimate.value - truths[i]) / e.estimate.error : kNaN;
    fit[e.parameter] = {{"value", e.estimate.value}, {"error", number_or_null(e.estimate.error)},
                        {"truth", truths[i]}, {"z", number_or_null(z)}, {"method", e.method}};
  }
  fit["nbg_s"] = shape.nbg_s;
  fit["nbg_i"] = fit_params.nbg_i;
  rep.summary["model"] = fit;
  rep.files["calibration_report.txt"] = format_calibration_report(entries);
  return rep;
}

RunReport run_scenario(const ScenarioConfig& config) {
  switch (config.kind) {
    case ScenarioKind::detection: return run_detection_scenario(config);
    case ScenarioKind::jamming: return run_jamming_scenario(config);
    case ScenarioKind::rangefinding: return run_rangefinding_scenario(config);
    case ScenarioKind::calibration: return run_calibration(config);
  }
  throw Error(ErrorCode::config_error, "unknown scenario kind");
}

NumericTable roc_table(const ScenarioConfig& config, bool quantum) {
  const auto p = config.system();
  require_valid(p);
  const auto a = analytic_distributions(p, quantum ? Illumination::quantum : Illumination::classical,
                                        config.analysis.n_av);
  const auto grid = threshold_grid(a.h1, a.h0, config.analysis.roc_points);
  NumericTable t;
  t.columns = {"threshold", "p_fa", "p_d"};
  for (const auto& pt : roc_curve(a.h1, a.h0, grid).points) t.rows.push_back({pt.threshold, pt.p_fa, pt.p_d});
  return t;
}

double OracleResult::max_sigma() const {
  double m = 0.0;
  for (const auto& q : quantities) m = std::max(m, std::abs(q.z));
  return m;
}

std::vector<SystemParams> oracle_parameter_sets(std::size_t n, std::uint64_t seed) {
  Rng rng(RngSeedPolicy{seed}.derive(0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, unit(rng)); };
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const std::size_t bright = std::min<std::size_t>(4, n);
  std::vector<SystemParams> sets;
  for (std::size_t i = 0; i < n; ++i) {
    SourceSetup s;
    s.eta_s = uniform(0.15, 0.3);
    s.eta_i = uniform(0.15, 0.3);
    s.tau_c = i % 2 == 0 ? 2e-9 : 0.2e-9;
    s.idler_background_rate = uniform(0.0, 1e3);
    const double n_mean = log_uniform(1e-3, 0.12);
    s.pair_rate = n_mean / s.tau_c;
    if (i + bright < n) {
      s.loss_db = uniform(30.0, 52.0);
      s.signal_background_rate = log_uniform(0.1e6, 3e6);
    } else {
      s.loss_db = (i % 2 == 0) ? 0.0 : 10.0;
      s.signal_background_rate = uniform(0.0, 1e3);
    }
    sets.push_back(make_params(s));
  }
  return sets;
}

namespace {

struct WindowCounts {
  std::uint64_t windows = 0;
  std::uint64_t idler = 0;
  std::uint64_t signal = 0;
  std::uint64_t both = 0;
};

WindowCounts count_windows(const SystemParams& p, std::uint64_t windows, Rng& rng) {
  WindowSampler sampler(p);
  WindowCounts c;
  c.windows = windows;
  std::uint64_t idx = 0;
  bool first = true;
  for (;;) {
    std::uint64_t gap = 0;
    const auto ph = sampler.next_active(rng, gap);
    if (gap >= windows) break;
    idx += gap + (first ? 0 : 1);
    first = false;
    if (idx >= windows) break;
    c.idler += ph.idler > 0;
    c.signal += ph.signal > 0;
    c.both += ph.idler > 0 && ph.signal > 0;
  }
  return c;
}

OracleQuantity compare(const std::string& name, double closed, std::uint64_t hits, std::uint64_t trials) {
  OracleQuantity q;
  q.name = name;
  q.closed_form = closed;
  q.trials = trials;
  q.empirical = trials ? static_cast<double>(hits) / static_cast<double>(trials) : kNaN;
  const double se = std::sqrt(closed * (1.0 - closed) / static_cast<double>(trials));
  q.z = se > 0.0 ? (q.empirical - closed) / se : (hits == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  return q;
}

}  // namespace

OracleResult oracle_check(const SystemParams& params, std::uint64_t windows, Rng& rng) {
  const auto probs = click_probabilities(params);
  const auto h1 = count_windows(params, windows, rng);
  const auto h0 = count_windows(params.with_xi(0.0), windows, rng);
  OracleResult r;
  r.params = params;
  r.quantities.push_back(compare("p_h0_ci", probs.p_h0_ci, h0.signal, h0.windows));
  r.quantities.push_back(compare("p_h1_ci", probs.p_h1_ci, h1.signal, h1.windows));
  r.quantities.push_back(compare("p_idler", probs.p_idler, h1.idler + h0.idler, h1.windows + h0.windows));
  r.quantities.push_back(compare("p_h0_qi", probs.p_h0_qi, h0.both, h0.idler));
  r.quantities.push_back(compare("p_h1_qi", probs.p_h1_qi, h1.both, h1.idler));
  return r;
}

}  // namespace qlidar
