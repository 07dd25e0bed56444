#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qlidar/params.hpp"

namespace qlidar {

/// Coefficients of the linear log-likelihood value Lambda(x, k) = m*x + c*k.
struct LinearLlvCoeffs {
  double m = 0.0;
  double c = 0.0;
};

/// m = ln[p1(1-p0) / (p0(1-p1))], c = ln[(1-p1)/(1-p0)].
/// Throws Error(degenerate_probability) unless both lie strictly in (0, 1).
LinearLlvCoeffs linear_coeffs(double p_h0, double p_h1);

/// Lambda = m*x + c*k. Positive values favour target present.
/// Throws Error(count_exceeds_trials) if x > k.
double llv(std::uint64_t x, std::uint64_t k, const LinearLlvCoeffs& coeffs);

struct LlvSeries {
  std::vector<double> values;
  std::vector<Hypothesis> labels;  ///< one per value
  std::size_t window = 1;          ///< N_av the values were averaged over

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }

  static LlvSeries uniform(std::vector<double> values, Hypothesis label);
};

/// Trailing moving mean; the first n_av - 1 points are not emitted.
/// Throws Error(window_too_large) if n_av is zero or exceeds the length.
LlvSeries rolling_average(const LlvSeries& series, std::size_t n_av);

struct DetectionRates {
  double p_d = 0.0;
  double p_fa = 0.0;

  double distinguishability() const { return p_d - p_fa; }
};

/// Fractions of h1 / h0 points strictly above the threshold.
/// Throws Error(empty_series) if either series is empty.
DetectionRates empirical_rates(const LlvSeries& h1, const LlvSeries& h0, double threshold = 0.0);

/// phi = 1 - [(1 - P_D) + P_FA] with empirical rates.
double empirical_distinguishability(const LlvSeries& h1, const LlvSeries& h0,
                                    double threshold = 0.0);

struct OptimalThreshold {
  double threshold = 0.0;
  double phi = 0.0;
};

/// Threshold maximising the empirical distinguishability.
OptimalThreshold optimal_distinguishability(const LlvSeries& h1, const LlvSeries& h0);

/// Number of sign changes (ignoring exact zeros).
std::size_t zero_crossings(std::span<const double> values);

/// Gaussian approximation of an LLV distribution.
struct LlvGaussian {
  double mu = 0.0;
  double sigma = 0.0;
};

/// mu = m*k*p + c*k, sigma = m*sqrt(k*p*(1-p)) / sqrt(n_av).
LlvGaussian analytic_llv_distribution(const LinearLlvCoeffs& coeffs, double p, double k,
                                      std::size_t n_av);

/// Upper-tail standard normal probability.
double normal_upper_tail(double z);
/// Inverse of normal_upper_tail for q in (0, 1).
double normal_upper_tail_inverse(double q);

/// Normalised Gaussian tail integrals above the threshold.
DetectionRates analytic_pd_pfa(const LlvGaussian& h1, const LlvGaussian& h0, double threshold = 0.0);

enum class Illumination { classical, quantum };

struct AnalyticLlv {
  LinearLlvCoeffs coeffs;
  LlvGaussian h1;
  LlvGaussian h0;
  double k = 0.0;  ///< trials per measurement (expected idler clicks for quantum)
};

/// Analytic H1/H0 LLV distributions for one illumination mode. For quantum
/// illumination k is the expected idler click count (T/tau_c) * p_idler.
AnalyticLlv analytic_distributions(const SystemParams& params, Illumination mode, std::size_t n_av);

struct RocPoint {
  double threshold = 0.0;
  double p_fa = 0.0;
  double p_d = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
};

std::vector<double> linear_grid(double lo, double hi, std::size_t n);

/// Threshold grid spanning both distributions out to `span_sigmas`.
std::vector<double> threshold_grid(const LlvGaussian& h1, const LlvGaussian& h0, std::size_t n,
                                   double span_sigmas = 6.0);

RocCurve roc_curve(const LlvGaussian& h1, const LlvGaussian& h0, std::span<const double> grid);
RocCurve empirical_roc(const LlvSeries& h1, const LlvSeries& h0, std::span<const double> grid);

/// Smallest f such that averaging the classical data f times longer (sigma
/// scaled by 1/sqrt(f)) gives a ROC at least as good as `target` at every
/// interior target point. Bisection on log f over [1e-6, 1e6].
///
/// Throws Error(no_convergence) if even f = 1e6 does not dominate.
double equivalent_averaging_factor(const LlvGaussian& ci_h1, const LlvGaussian& ci_h0,
                                   const RocCurve& target);

/// Convenience: target is the quantum ROC at n_av over a threshold grid of
/// `grid_points`; the classical distributions are evaluated at the same n_av.
double equivalent_averaging_factor(const SystemParams& ci_params, const SystemParams& qi_params,
                                   std::size_t n_av, std::size_t grid_points = 201);

}  // namespace qlidar
