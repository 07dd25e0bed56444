#include "qlidar/llv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "qlidar/click_model.hpp"
#include "qlidar/errors.hpp"

namespace qlidar {

LinearLlvCoeffs linear_coeffs(double p_h0, double p_h1) {
  auto interior = [](double p) { return p > 0.0 && p < 1.0; };
  if (!interior(p_h0) || !interior(p_h1)) {
    throw Error(ErrorCode::degenerate_probability,
                "click probabilities must lie in (0, 1), got p_h0=" + std::to_string(p_h0) +
                    " p_h1=" + std::to_string(p_h1));
  }
  // log1p keeps c accurate when both probabilities are ~1e-4.
  const double log_ratio_miss = std::log1p(-p_h1) - std::log1p(-p_h0);
  return {std::log(p_h1) - std::log(p_h0) - log_ratio_miss, log_ratio_miss};
}

double llv(std::uint64_t x, std::uint64_t k, const LinearLlvCoeffs& coeffs) {
  if (x > k) {
    throw Error(ErrorCode::count_exceeds_trials,
                "x=" + std::to_string(x) + " exceeds k=" + std::to_string(k));
  }
  return coeffs.m * static_cast<double>(x) + coeffs.c * static_cast<double>(k);
}

LlvSeries LlvSeries::uniform(std::vector<double> values, Hypothesis label) {
  LlvSeries s;
  s.labels.assign(values.size(), label);
  s.values = std::move(values);
  return s;
}

LlvSeries rolling_average(const LlvSeries& series, std::size_t n_av) {
  if (n_av == 0 || n_av > series.size()) {
    throw Error(ErrorCode::window_too_large,
                "window " + std::to_string(n_av) + " for series of length " +
                    std::to_string(series.size()));
  }
  LlvSeries out;
  out.window = series.window * n_av;
  const std::size_t n_out = series.size() - n_av + 1;
  out.values.reserve(n_out);
  const bool labelled = series.labels.size() == series.values.size();
  // Direct summation per window: reproducible bit-for-bit from the same inputs.
  for (std::size_t i = 0; i < n_out; ++i) {
    double sum = 0.0;
    for (std::size_t j = i; j < i + n_av; ++j) sum += series.values[j];
    out.values.push_back(sum / static_cast<double>(n_av));
    if (labelled) out.labels.push_back(series.labels[i + n_av - 1]);
  }
  return out;
}

DetectionRates empirical_rates(const LlvSeries& h1, const LlvSeries& h0, double threshold) {
  if (h1.empty() || h0.empty()) throw Error(ErrorCode::empty_series, "distinguishability needs both series");
  auto fraction_above = [threshold](const LlvSeries& s) {
    const auto n = std::count_if(s.values.begin(), s.values.end(),
                                 [threshold](double v) { return v > threshold; });
    return static_cast<double>(n) / static_cast<double>(s.size());
  };
  return {fraction_above(h1), fraction_above(h0)};
}

double empirical_distinguishability(const LlvSeries& h1, const LlvSeries& h0, double threshold) {
  const auto r = empirical_rates(h1, h0, threshold);
  return 1.0 - ((1.0 - r.p_d) + r.p_fa);
}

OptimalThreshold optimal_distinguishability(const LlvSeries& h1, const LlvSeries& h0) {
  if (h1.empty() || h0.empty()) throw Error(ErrorCode::empty_series, "distinguishability needs both series");
  std::vector<double> a = h1.values;
  std::vector<double> b = h0.values;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto above = [](const std::vector<double>& sorted, double t) {
    return static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t)) /
           static_cast<double>(sorted.size());
  };
  OptimalThreshold best{-std::numeric_limits<double>::infinity(), 0.0};
  auto consider = [&](double t) {
    const double phi = above(a, t) - above(b, t);
    if (phi > best.phi) best = {t, phi};
  };
  for (double t : a) consider(t);
  for (double t : b) consider(t);
  return best;
}

std::size_t zero_crossings(std::span<const double> values) {
  std::size_t crossings = 0;
  int last = 0;
  for (double v : values) {
    const int sign = (v > 0.0) - (v < 0.0);
    if (sign == 0) continue;
    if (last != 0 && sign != last) ++crossings;
    last = sign;
  }
  return crossings;
}

LlvGaussian analytic_llv_distribution(const LinearLlvCoeffs& coeffs, double p, double k,
                                      std::size_t n_av) {
  const double mean_x = k * p;
  const double sigma_x = std::sqrt(k * p * (1.0 - p));
  return {coeffs.m * mean_x + coeffs.c * k,
          std::abs(coeffs.m) * sigma_x / std::sqrt(static_cast<double>(n_av))};
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double normal_upper_tail_inverse(double q) {
  return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * q);
}

namespace {

double upper_tail(const LlvGaussian& g, double threshold) {
  if (g.sigma > 0.0) return normal_upper_tail((threshold - g.mu) / g.sigma);
  return g.mu > threshold ? 1.0 : 0.0;
}

}  // namespace

DetectionRates analytic_pd_pfa(const LlvGaussian& h1, const LlvGaussian& h0, double threshold) {
  return {upper_tail(h1, threshold), upper_tail(h0, threshold)};
}

AnalyticLlv analytic_distributions(const SystemParams& params, Illumination mode, std::size_t n_av) {
  AnalyticLlv out;
  HypothesisProbs probs;
  const auto trials = static_cast<double>(params.ci_trials());
  if (mode == Illumination::classical) {
    probs = ci_click_probs(params);
    out.k = trials;
  } else {
    probs = qi_click_probs(params);
    out.k = trials * idler_prob(params);
  }
  out.coeffs = linear_coeffs(probs.h0, probs.h1);
  out.h1 = analytic_llv_distribution(out.coeffs, probs.h1, out.k, n_av);
  out.h0 = analytic_llv_distribution(out.coeffs, probs.h0, out.k, n_av);
  return out;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  std::vector<double> grid;
  if (n == 0) return grid;
  if (n == 1) return {lo};
  grid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return grid;
}

std::vector<double> threshold_grid(const LlvGaussian& h1, const LlvGaussian& h0, std::size_t n,
                                   double span_sigmas) {
  const double lo = std::min(h0.mu - span_sigmas * h0.sigma, h1.mu - span_sigmas * h1.sigma);
  const double hi = std::max(h0.mu + span_sigmas * h0.sigma, h1.mu + span_sigmas * h1.sigma);
  return linear_grid(lo, hi, n);
}

RocCurve roc_curve(const LlvGaussian& h1, const LlvGaussian& h0, std::span<const double> grid) {
  RocCurve roc;
  roc.points.reserve(grid.size());
  for (double t : grid) {
    const auto r = analytic_pd_pfa(h1, h0, t);
    roc.points.push_back({t, r.p_fa, r.p_d});
  }
  return roc;
}

RocCurve empirical_roc(const LlvSeries& h1, const LlvSeries& h0, std::span<const double> grid) {
  RocCurve roc;
  roc.points.reserve(grid.size());
  for (double t : grid) {
    const auto r = empirical_rates(h1, h0, t);
    roc.points.push_back({t, r.p_fa, r.p_d});
  }
  return roc;
}

double equivalent_averaging_factor(const LlvGaussian& ci_h1, const LlvGaussian& ci_h0,
                                   const RocCurve& target) {
  constexpr double kEdge = 1e-15;
  struct Quantiles {
    double fa;
    double p_d;
  };
  std::vector<Quantiles> interior;
  for (const auto& pt : target.points) {
    if (pt.p_fa > kEdge && pt.p_fa < 1.0 - kEdge && pt.p_d > kEdge && pt.p_d < 1.0 - kEdge) {
      interior.push_back({normal_upper_tail_inverse(pt.p_fa), pt.p_d});
    }
  }
  if (interior.empty()) throw Error(ErrorCode::no_convergence, "target ROC has no interior points");

  auto dominates = [&](double f) {
    const double root = std::sqrt(f);
    for (const auto& q : interior) {
      const double threshold = ci_h0.mu + ci_h0.sigma * q.fa / root;
      const double p_d = normal_upper_tail((threshold - ci_h1.mu) * root / ci_h1.sigma);
      if (p_d < q.p_d - 1e-12) return false;
    }
    return true;
  };

  double lo = 1e-6;
  double hi = 1e6;
  if (!dominates(hi)) {
    throw Error(ErrorCode::no_convergence, "classical ROC does not reach the target below f = 1e6");
  }
  if (dominates(lo)) return lo;
  while (hi / lo - 1.0 > 1e-12) {
    const double mid = std::sqrt(lo * hi);
    if (dominates(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double equivalent_averaging_factor(const SystemParams& ci_params, const SystemParams& qi_params,
                                   std::size_t n_av, std::size_t grid_points) {
  const auto qi = analytic_distributions(qi_params, Illumination::quantum, n_av);
  const auto ci = analytic_distributions(ci_params, Illumination::classical, n_av);
  const auto grid = threshold_grid(qi.h1, qi.h0, grid_points);
  return equivalent_averaging_factor(ci.h1, ci.h0, roc_curve(qi.h1, qi.h0, grid));
}

}  // namespace qlidar
