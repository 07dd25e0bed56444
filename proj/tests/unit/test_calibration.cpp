#include <gtest/gtest.h>

#include <cmath>

#include "qlidar/calibration.hpp"
#include "qlidar/errors.hpp"
#include "qlidar/presets.hpp"

using namespace qlidar;

namespace {

CalibrationRun counts_run(CalibrationConfig c, std::uint64_t signal, std::uint64_t idler, double t_int = 0.1) {
  CalibrationRun r{c, {}, t_int, 2e-9};
  MeasurementRecord m;
  m.k_ci = static_cast<std::uint64_t>(std::llround(t_int / 2e-9));
  m.signal_counts = signal;
  m.idler_counts = idler;
  r.measurements.push_back(m);
  return r;
}

CalibrationRun simulate(CalibrationConfig c, const SystemParams& p, Hypothesis h, std::size_t n,
                        std::uint64_t seed, bool model = false) {
  CalibrationRun r{c, {}, p.t_int, p.tau_c};
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(RngSeedPolicy{seed}.derive(i));
    r.measurements.push_back(model ? sample_from_click_model(p, h, rng) : run_measurement(p, h, rng));
  }
  return r;
}

SystemParams bright_model() {
  SystemParams p;
  p.n_mean = 0.05;
  p.xi = 0.3;
  p.eta_s = 0.5;
  p.eta_i = 0.4;
  p.nbg_s = 1e-4;
  p.tau_c = 1e-9;
  p.t_int = 1e-3;
  return p;
}

}  // namespace

TEST(Calibration, LiteralEfficiencyIsRateOverBrightness) {
  const auto run = counts_run(CalibrationConfig::source_only, 25000, 20000);
  const auto e = estimate_efficiencies(run, 1e6, RateMethod::literal);
  EXPECT_NEAR(e.eta_s.value, 0.25, 1e-12);
  EXPECT_NEAR(e.eta_i.value, 0.20, 1e-12);
  EXPECT_NEAR(e.eta_s.error, std::sqrt(25000.0) / 1e5, 1e-6);
}

TEST(Calibration, RateAboveBrightnessThrows) {
  const auto run = counts_run(CalibrationConfig::source_only, 200000, 1000);
  try {
    estimate_efficiencies(run, 1e6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::rate_exceeds_brightness);
  }
}

TEST(Calibration, LiteralReflectivity) {
  const auto dark = counts_run(CalibrationConfig::noise_only, 100, 0);
  const auto with = counts_run(CalibrationConfig::target_present, 1100, 0);
  const auto without = counts_run(CalibrationConfig::source_only, 10100, 0);
  EXPECT_NEAR(estimate_reflectivity(with, without, dark).value, 0.1, 1e-12);
}

TEST(Calibration, NegativeNetRateThrows) {
  const auto dark = counts_run(CalibrationConfig::noise_only, 5000, 0);
  const auto with = counts_run(CalibrationConfig::target_present, 1000, 0);
  const auto without = counts_run(CalibrationConfig::source_only, 10000, 0);
  try {
    estimate_reflectivity(with, without, dark);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::negative_net_rate);
  }
  EXPECT_THROW(estimate_reflectivity(counts_run(CalibrationConfig::target_present, 6000, 0, 1.0), without, dark),
               Error);
}

TEST(Calibration, ThermalInversionRecoversEfficiencies) {
  auto p = presets::stationary_33db();
  p.xi = 1.0;
  p.nbg_s = 0.0;
  const auto run = simulate(CalibrationConfig::source_only, p, Hypothesis::h1, 50, 1);
  const auto e = estimate_efficiencies(run, p.pair_rate(), RateMethod::thermal);
  EXPECT_LT(std::abs(e.eta_s.value - p.eta_s), 3 * e.eta_s.error);
  EXPECT_LT(std::abs(e.eta_i.value - p.eta_i), 3 * e.eta_i.error);
  // the literal ratio is biased low by click saturation
  const auto lit = estimate_efficiencies(run, p.pair_rate(), RateMethod::literal);
  EXPECT_LT(lit.eta_s.value, e.eta_s.value);
}

TEST(Calibration, ShapeFitOnModelDataReturnsUnity) {
  const auto p = bright_model();
  const auto h0 = simulate(CalibrationConfig::target_absent, p, Hypothesis::h0, 100, 2, true);
  const auto h1 = simulate(CalibrationConfig::target_present, p, Hypothesis::h1, 100, 3, true);
  const auto fit = fit_shape_params(h0, h1, p, 100);
  EXPECT_NEAR(fit.beta.value, 1.0, 0.02);
  EXPECT_NEAR(fit.gamma.value, 1.0, 0.02);
  EXPECT_NEAR(fit.nbg_s, p.nbg_s, 0.1 * p.nbg_s);
}

TEST(Calibration, ShapeFitRecoversDistortion) {
  auto p = bright_model();
  p.beta = 1.3;
  p.gamma = 0.7;
  const auto h0 = simulate(CalibrationConfig::target_absent, p, Hypothesis::h0, 100, 4, true);
  const auto h1 = simulate(CalibrationConfig::target_present, p, Hypothesis::h1, 100, 5, true);
  auto guess = p;
  guess.beta = guess.gamma = 1.0;
  const auto fit = fit_shape_params(h0, h1, guess, 0);
  EXPECT_LT(std::abs(fit.beta.value - 1.3), 3 * fit.beta.error + 1e-6);
  EXPECT_LT(std::abs(fit.gamma.value - 0.7), 3 * fit.gamma.error + 1e-6);
}

TEST(Calibration, ShapeFitNoRoot) {
  const auto p = bright_model();
  const auto h0 = simulate(CalibrationConfig::target_absent, p, Hypothesis::h0, 5, 6, true);
  auto dim = h0;
  for (auto& m : dim.measurements) m.signal_counts = m.coincidence_counts = 0;
  // h1 frequencies below h0: no positive gamma can produce them
  try {
    fit_shape_params(h0, dim, p, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_root);
  }
}

TEST(Calibration, ReportFormat) {
  const std::string r = format_calibration_report({{"xi", {0.5, 0.01}, "ratio"}});
  EXPECT_NE(r.find("parameter value error method"), std::string::npos);
  EXPECT_NE(r.find("xi 0.5 0.01 ratio"), std::string::npos);
}
