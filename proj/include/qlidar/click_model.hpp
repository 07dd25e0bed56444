#pragma once

#include "qlidar/params.hpp"

namespace qlidar {

struct HypothesisProbs {
  double h0 = 0.0;  ///< target absent
  double h1 = 0.0;  ///< target present
};

/// Single-window click probabilities for classical (unheralded) and quantum
/// (idler-heralded) illumination under a Poissonian signal background.
struct ClickProbabilities {
  double p_h0_ci = 0.0;
  double p_h1_ci = 0.0;
  double p_h0_qi = 0.0;  ///< identical to p_h0_ci
  double p_h1_qi = 0.0;  ///< per idler-heralded window
  double p_idler = 0.0;
  double n_cond = 0.0;   ///< signal mean after an idler no-click
};

/// Signal detector click probability per window.
///   h0 = 1 - exp(-nbg*eta_s)
///   h1 = 1 - exp(-nbg*eta_s / (1+m)) / (1+m),   m = gamma*eta_s*xi*n
HypothesisProbs ci_click_probs(const SystemParams& params);

/// Idler click probability, 1 - 1/(1 + eta_i*n + eta_i*nbg_i).
double idler_prob(const SystemParams& params);

/// Signal mean photon number conditioned on the idler not firing.
double conditioned_mean(const SystemParams& params);

/// Heralded signal click probability. The heralded state is treated as the
/// difference of the unconditioned thermal state and the idler-no-click
/// conditioned one, weighted by the idler firing probability.
///
/// Throws Error(degenerate_herald) when the idler can never fire.
HypothesisProbs qi_click_probs(const SystemParams& params);

ClickProbabilities click_probabilities(const SystemParams& params);

}  // namespace qlidar
