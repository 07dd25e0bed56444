#include "qlidar/click_model.hpp"

#include <cmath>

#include "qlidar/errors.hpp"

namespace qlidar {

namespace {

// Vacuum probability of a thermal mode (mean z) displaced by a coherent
// background (mean b) is exp(-u) with u = b/(1+z) + ln(1+z).
double vacuum_exponent(double background, double z) {
  return background / (1.0 + z) + std::log1p(z);
}

}  // namespace

HypothesisProbs ci_click_probs(const SystemParams& p) {
  const double b = p.nbg_s * p.eta_s;
  const double m = p.gamma * p.eta_s * p.xi * p.n_mean;
  return {-std::expm1(-b), -std::expm1(-vacuum_exponent(b, m))};
}

double idler_prob(const SystemParams& p) {
  const double a = p.eta_i * (p.n_mean + p.nbg_i);
  return a / (1.0 + a);
}

double conditioned_mean(const SystemParams& p) {
  const double herald_bg = p.eta_i * p.nbg_i;
  return p.n_mean * (1.0 + herald_bg - p.eta_i) / (1.0 + herald_bg + p.n_mean * p.eta_i);
}

HypothesisProbs qi_click_probs(const SystemParams& p) {
  const double p_idler = idler_prob(p);
  if (!(p_idler > 0.0)) {
    throw Error(ErrorCode::degenerate_herald, "idler firing probability is zero");
  }
  const double b = p.nbg_s * p.eta_s;
  const double scale = p.xi * p.eta_s * p.beta;
  const double z_all = p.n_mean * scale;
  const double z_cond = conditioned_mean(p) * scale;

  // 1 - p_h1 = [A - (1 - p_I) B] / p_I with A = exp(-u_all), B = exp(-u_cond).
  // Rearranged as p_h1 = (1 - B) + (B - A) / p_I so both terms keep full
  // precision when all probabilities are ~1e-4.
  const double u_cond = vacuum_exponent(b, z_cond);
  const double one_minus_b = -std::expm1(-u_cond);
  // u_cond - u_all, formed without cancellation.
  const double du = b * (z_all - z_cond) / ((1.0 + z_all) * (1.0 + z_cond)) +
                    std::log1p((z_cond - z_all) / (1.0 + z_all));
  const double b_minus_a = -std::exp(-u_cond) * std::expm1(du);

  return {-std::expm1(-b), one_minus_b + b_minus_a / p_idler};
}

ClickProbabilities click_probabilities(const SystemParams& p) {
  const auto ci = ci_click_probs(p);
  const auto qi = qi_click_probs(p);
  ClickProbabilities out;
  out.p_h0_ci = ci.h0;
  out.p_h1_ci = ci.h1;
  out.p_h0_qi = qi.h0;
  out.p_h1_qi = qi.h1;
  out.p_idler = idler_prob(p);
  out.n_cond = conditioned_mean(p);
  return out;
}

}  // namespace qlidar
