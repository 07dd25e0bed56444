#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qlidar/click_model.hpp"
#include "qlidar/errors.hpp"
#include "qlidar/montecarlo.hpp"
#include "qlidar/presets.hpp"

using namespace qlidar;

namespace {

SystemParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SystemParams p;
  p.n_mean = 1e-3 * std::pow(300.0, u(rng));
  p.xi = std::pow(10.0, -5.5 * u(rng));
  p.eta_s = 0.05 + 0.9 * u(rng);
  p.eta_i = 0.05 + 0.9 * u(rng);
  p.nbg_s = 1e-4 * std::pow(1e3, u(rng));
  p.nbg_i = 0.0;
  return p;
}

}  // namespace

TEST(ClickModel, NoTargetMakesHypothesesEqual) {
  const auto p = presets::stationary_33db().with_xi(0.0);
  const auto c = click_probabilities(p);
  EXPECT_DOUBLE_EQ(c.p_h1_ci, c.p_h0_ci);
  EXPECT_NEAR(c.p_h1_qi, c.p_h0_qi, 1e-15);
}

TEST(ClickModel, NoBackgroundCiIsThermalClick) {
  SystemParams p;
  p.n_mean = 0.1;
  p.xi = 0.5;
  p.eta_s = 0.4;
  const auto ci = ci_click_probs(p);
  EXPECT_EQ(ci.h0, 0.0);
  const double m = 0.1 * 0.5 * 0.4;
  EXPECT_NEAR(ci.h1, m / (1.0 + m), 1e-15);
}

TEST(ClickModel, IdlerProbabilityThermalForm) {
  SystemParams p;
  p.n_mean = 0.02;
  p.eta_i = 0.2;
  EXPECT_NEAR(idler_prob(p), 0.004 / 1.004, 1e-16);
}

TEST(ClickModel, DegenerateHeraldThrows) {
  SystemParams p;
  p.n_mean = 0.0;
  p.nbg_s = 1e-3;
  try {
    qi_click_probs(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_herald);
  }
}

TEST(ClickModel, SaturatesWithBackground) {
  auto p = presets::stationary_33db();
  p.nbg_s = 1e4;
  const auto c = click_probabilities(p);
  EXPECT_NEAR(c.p_h0_ci, 1.0, 1e-12);
  EXPECT_NEAR(c.p_h1_ci, 1.0, 1e-12);
  EXPECT_NEAR(c.p_h1_qi, 1.0, 1e-12);
}

TEST(ClickModel, ProbabilitiesInUnitIntervalAndOrdered) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto p = random_params(rng);
    const auto c = click_probabilities(p);
    EXPECT_GE(c.p_h0_ci, 0.0);
    EXPECT_LE(c.p_h1_qi, 1.0);
    EXPECT_GE(c.p_h1_ci, c.p_h0_ci);
    // heralding concentrates the return into the heralded windows
    EXPECT_GE(c.p_h1_qi, c.p_h1_ci);
    EXPECT_LE(c.n_cond, p.n_mean);
  }
}

// Without signal background the closed form and the sampler's joint law
// (derived from the thermal generating function) coincide. A background
// displacing the thermal mode and one adding an independent Poisson field
// differ at order b*m, which stays far below sampling resolution.
TEST(ClickModel, HeraldedProbabilityMatchesJointLaw) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    auto p = random_params(rng);
    const double b = p.nbg_s * p.eta_s;
    auto law = joint_click_law(p);
    auto c = click_probabilities(p);
    EXPECT_NEAR(c.p_idler, law.idler(), 1e-12 * law.idler());
    EXPECT_NEAR(c.p_h1_qi, law.both / law.idler(), 2.0 * b * c.p_h1_qi);
    EXPECT_NEAR(c.p_h1_ci, law.signal(), 2.0 * b * c.p_h1_ci);

    p.nbg_s = 0.0;
    law = joint_click_law(p);
    c = click_probabilities(p);
    // the law is formed from differences of O(1) vacuum terms
    EXPECT_NEAR(c.p_h1_qi, law.both / law.idler(), 1e-9 * c.p_h1_qi + 1e-15 / law.idler());
    EXPECT_NEAR(c.p_h1_ci, law.signal(), 1e-12 * law.signal() + 1e-15);
  }
}

TEST(ClickModel, FitParametersScaleTheReturn) {
  auto p = presets::stationary_33db();
  const auto base = click_probabilities(p);
  p.gamma = 2.0;
  p.beta = 2.0;
  const auto scaled = click_probabilities(p);
  EXPECT_GT(scaled.p_h1_ci, base.p_h1_ci);
  EXPECT_GT(scaled.p_h1_qi, base.p_h1_qi);
  EXPECT_DOUBLE_EQ(scaled.p_h0_ci, base.p_h0_ci);
  EXPECT_DOUBLE_EQ(scaled.p_idler, base.p_idler);
}

// 377 kHz pair source: simulated idler click frequency within 3 SE.
TEST(ClickModel, IdlerFrequencyMatchesSampler) {
  SourceSetup s;
  s.pair_rate = 377e3;
  s.loss_db = 33.5;
  s.eta_s = 0.2329;
  s.eta_i = 0.1958;
  s.signal_background_rate = 1e6;
  const auto p = make_params(s);
  Rng rng(99);
  WindowSampler sampler(p);
  const std::uint64_t n = 10'000'000;
  std::uint64_t clicks = 0;
  for (std::uint64_t i = 0; i < n; ++i) clicks += sampler(rng).idler_click;
  const double q = idler_prob(p);
  const double se = std::sqrt(q * (1 - q) / n);
  EXPECT_LT(std::abs(static_cast<double>(clicks) / n - q), 3 * se);
}
