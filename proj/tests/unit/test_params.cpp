#include <gtest/gtest.h>

#include <cmath>

#include "qlidar/errors.hpp"
#include "qlidar/params.hpp"
#include "qlidar/presets.hpp"

using namespace qlidar;

TEST(Params, TrialCountRoundsNearIntegerRatios) {
  SystemParams p;
  p.tau_c = 2e-9;
  p.t_int = 0.1;
  EXPECT_EQ(p.ci_trials(), 50000000u);
  p.tau_c = 3e-9;
  EXPECT_EQ(p.ci_trials(), 33333333u);
  p.t_int = 1.0;
  p.tau_c = 0.2e-9;
  EXPECT_EQ(p.ci_trials(), 5000000000u);
}

TEST(Params, SetupConvertsRatesToWindowMeans) {
  SourceSetup s;
  s.pair_rate = 6.8e6;
  s.loss_db = 30.0;
  s.eta_s = 0.25;
  s.eta_i = 0.2;
  s.signal_background_rate = 1e6;
  s.idler_background_rate = 500.0;
  s.tau_c = 2e-9;
  const auto p = make_params(s);
  EXPECT_DOUBLE_EQ(p.n_mean, 6.8e6 * 2e-9);
  EXPECT_NEAR(p.xi, 1e-3, 1e-15);
  // detected background per window is nbg * eta
  EXPECT_NEAR(p.nbg_s * p.eta_s, 2e-3, 1e-15);
  EXPECT_NEAR(p.signal_background_rate(), 1e6, 1e-6);
  EXPECT_NEAR(p.idler_background_rate(), 500.0, 1e-9);
  EXPECT_NEAR(p.pair_rate(), 6.8e6, 1e-6);
}

TEST(Params, BackgroundRateRoundTrip) {
  const auto p = presets::stationary_33db().with_signal_background_rate(2.3e6);
  EXPECT_NEAR(p.signal_background_rate(), 2.3e6, 1e-6);
}

TEST(Params, WithTauCKeepsRates) {
  const auto p = presets::stationary_33db();
  const auto q = p.with_tau_c(0.2e-9);
  EXPECT_NEAR(q.pair_rate(), p.pair_rate(), 1e-3);
  EXPECT_NEAR(q.signal_background_rate(), p.signal_background_rate(), 1e-6);
  EXPECT_EQ(q.tau_c, 0.2e-9);
}

TEST(Params, ValidationListsEveryIssue) {
  SystemParams p;
  p.xi = 1.5;
  p.eta_s = 0.0;
  p.nbg_s = -1.0;
  p.tau_c = 1.0;
  p.t_int = 0.5;
  const auto r = validate(p);
  EXPECT_TRUE(r.contains("xi"));
  EXPECT_TRUE(r.contains("eta_s"));
  EXPECT_TRUE(r.contains("nbg_s"));
  EXPECT_TRUE(r.contains("t_int must be at least tau_c"));
  EXPECT_FALSE(r.contains("eta_i"));
  try {
    require_valid(p);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_params);
    EXPECT_NE(std::string(e.what()).find("InvalidParams"), std::string::npos);
  }
}

TEST(Params, NanRejected) {
  SystemParams p;
  p.n_mean = std::nan("");
  EXPECT_FALSE(validate(p).ok());
}

TEST(Params, PresetsAreValid) {
  for (const auto& p : {presets::stationary_33db(), presets::stationary_52db(), presets::jamming(),
                        presets::rangefinding()}) {
    EXPECT_TRUE(validate(p).ok()) << validate(p).to_string();
  }
}

TEST(Params, LossConversion) {
  EXPECT_DOUBLE_EQ(loss_db_to_transmission(0.0), 1.0);
  EXPECT_NEAR(loss_db_to_transmission(10.0), 0.1, 1e-15);
  EXPECT_NEAR(loss_db_to_transmission(52.0), 6.309573444801929e-6, 1e-18);
}
