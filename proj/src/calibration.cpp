#include "qlidar/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>

#include "qlidar/click_model.hpp"
#include "qlidar/errors.hpp"

namespace qlidar {

std::string to_string(CalibrationConfig c) {
  switch (c) {
    case CalibrationConfig::source_only: return "source_only";
    case CalibrationConfig::noise_only: return "noise_only";
    case CalibrationConfig::target_present: return "target_present";
    case CalibrationConfig::target_absent: return "target_absent";
  }
  return "unknown";
}

std::string to_string(RateMethod m) { return m == RateMethod::literal ? "literal" : "thermal"; }

namespace {

template <class F>
std::uint64_t sum_of(const std::vector<MeasurementRecord>& ms, F field) {
  return std::accumulate(ms.begin(), ms.end(), std::uint64_t{0},
                         [&](std::uint64_t acc, const MeasurementRecord& m) { return acc + field(m); });
}

void require_nonempty(const CalibrationRun& run) {
  if (run.measurements.empty()) {
    throw Error(ErrorCode::insufficient_statistics, to_string(run.configuration) + " run has no measurements");
  }
}

struct Frequency {
  double p = 0.0;
  double sigma = 0.0;
};

Frequency frequency(std::uint64_t hits, std::uint64_t trials) {
  if (trials == 0) return {};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  return {p, std::sqrt(std::max(p * (1.0 - p), 1.0 / n) / n)};
}

// First-order error of f over independent inputs, by central differences.
template <std::size_t N>
double propagate(const std::function<double(const std::array<double, N>&)>& f,
                 const std::array<Frequency, N>& in) {
  std::array<double, N> x{};
  for (std::size_t i = 0; i < N; ++i) x[i] = in[i].p;
  double var = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (!(in[i].sigma > 0.0)) continue;
    const double h = 1e-3 * in[i].sigma;
    auto up = x;
    auto down = x;
    up[i] += h;
    down[i] -= h;
    const double d = (f(up) - f(down)) / (2.0 * h);
    var += d * d * in[i].sigma * in[i].sigma;
  }
  return std::sqrt(var);
}

// Net per-window source mean from a click frequency and its dark frequency.
double net_mean(double p, double p_dark, RateMethod method) {
  return method == RateMethod::thermal ? (p - p_dark) / (1.0 - p) : p - p_dark;
}

Frequency signal_frequency(const CalibrationRun& r) { return frequency(r.signal_counts(), r.windows()); }
Frequency idler_frequency(const CalibrationRun& r) { return frequency(r.idler_counts(), r.windows()); }

}  // namespace

std::uint64_t CalibrationRun::windows() const {
  return sum_of(measurements, [](const MeasurementRecord& m) { return m.k_ci; });
}
std::uint64_t CalibrationRun::signal_counts() const {
  return sum_of(measurements, [](const MeasurementRecord& m) { return m.signal_counts; });
}
std::uint64_t CalibrationRun::idler_counts() const {
  return sum_of(measurements, [](const MeasurementRecord& m) { return m.idler_counts; });
}
std::uint64_t CalibrationRun::coincidence_counts() const {
  return sum_of(measurements, [](const MeasurementRecord& m) { return m.coincidence_counts; });
}

Efficiencies estimate_efficiencies(const CalibrationRun& source_only, double brightness, RateMethod method,
                                   const CalibrationRun* dark) {
  require_nonempty(source_only);
  if (!(brightness > 0.0)) throw Error(ErrorCode::invalid_params, "brightness must be positive");
  // Per-window frequencies; the literal method reduces to rate / brightness.
  const double n_pairs = brightness * source_only.tau_c;
  const Frequency none{};
  auto arm = [&](Frequency p, Frequency p_dark, const char* name) {
    if (net_mean(p.p, p_dark.p, RateMethod::literal) / source_only.tau_c > brightness) {
      throw Error(ErrorCode::rate_exceeds_brightness,
                  std::string(name) + " rate " + std::to_string(p.p / source_only.tau_c) +
                      " Hz exceeds brightness " + std::to_string(brightness) + " Hz");
    }
    std::function<double(const std::array<double, 2>&)> eta = [&](const std::array<double, 2>& x) {
      return net_mean(x[0], x[1], method) / n_pairs;
    };
    Estimate e{eta({p.p, p_dark.p}), propagate<2>(eta, {p, p_dark})};
    if (e.value > 1.0) {
      throw Error(ErrorCode::rate_exceeds_brightness,
                  std::string(name) + " efficiency " + std::to_string(e.value) + " exceeds 1");
    }
    return e;
  };
  Efficiencies out;
  out.eta_s = arm(signal_frequency(source_only), dark ? signal_frequency(*dark) : none, "signal");
  out.eta_i = arm(idler_frequency(source_only), dark ? idler_frequency(*dark) : none, "idler");
  return out;
}

Estimate estimate_reflectivity(const CalibrationRun& with_filter, const CalibrationRun& without_filter,
                               const CalibrationRun& dark, RateMethod method) {
  for (const auto* r : {&with_filter, &without_filter, &dark}) require_nonempty(*r);
  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); };
  if (!same(with_filter.t_int, without_filter.t_int) || !same(with_filter.t_int, dark.t_int)) {
    throw Error(ErrorCode::invalid_params, "reflectivity runs use different integration times");
  }
  const auto pw = signal_frequency(with_filter);
  const auto po = signal_frequency(without_filter);
  const auto pd = signal_frequency(dark);
  if (pd.p > pw.p || pd.p >= po.p) {
    throw Error(ErrorCode::negative_net_rate,
                "dark rate " + std::to_string(pd.p / dark.tau_c) + " Hz exceeds the filtered (" +
                    std::to_string(pw.p / with_filter.tau_c) + " Hz) or unfiltered (" +
                    std::to_string(po.p / without_filter.tau_c) + " Hz) rate");
  }
  std::function<double(const std::array<double, 3>&)> xi = [method](const std::array<double, 3>& x) {
    return net_mean(x[0], x[2], method) / net_mean(x[1], x[2], method);
  };
  return {xi({pw.p, po.p, pd.p}), propagate<3>(xi, {pw, po, pd})};
}

namespace {

constexpr double kFitLo = 1e-3;
constexpr double kFitHi = 1e3;

// Root of f(x) = target for increasing f, bisecting log x.
double solve_monotone(const std::function<double(double)>& f, double target, const char* name) {
  const double f_lo = f(kFitLo);
  const double f_hi = f(kFitHi);
  if (!(target >= f_lo && target <= f_hi)) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s: target %.6g outside achievable [%.6g, %.6g]", name, target, f_lo, f_hi);
    throw Error(ErrorCode::no_root, buf);
  }
  double lo = std::log(kFitLo);
  double hi = std::log(kFitHi);
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    (f(std::exp(mid)) < target ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

std::vector<MeasurementRecord> head(const CalibrationRun& run, std::size_t n) {
  if (n == 0 || n >= run.measurements.size()) return run.measurements;
  return {run.measurements.begin(), run.measurements.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace

ShapeFit fit_shape_params(const CalibrationRun& h0_run, const CalibrationRun& h1_run, const SystemParams& params,
                          std::size_t first_n) {
  require_nonempty(h0_run);
  require_nonempty(h1_run);
  const CalibrationRun h0{h0_run.configuration, head(h0_run, first_n), h0_run.t_int, h0_run.tau_c};
  const CalibrationRun h1{h1_run.configuration, head(h1_run, first_n), h1_run.t_int, h1_run.tau_c};

  const auto p0 = signal_frequency(h0);
  const auto p1_ci = signal_frequency(h1);
  const auto p1_qi = frequency(h1.coincidence_counts(), h1.idler_counts());

  auto with_background = [&](double p_h0) {
    SystemParams p = params;
    p.nbg_s = -std::log1p(-p_h0) / p.eta_s;
    return p;
  };
  auto fit_gamma = [&](double p_h0, double target) {
    const auto base = with_background(p_h0);
    return solve_monotone(
        [&](double g) {
          auto p = base;
          p.gamma = g;
          return ci_click_probs(p).h1;
        },
        target, "gamma");
  };
  auto fit_beta = [&](double p_h0, double target) {
    const auto base = with_background(p_h0);
    return solve_monotone(
        [&](double b) {
          auto p = base;
          p.beta = b;
          return qi_click_probs(p).h1;
        },
        target, "beta");
  };
  // Error from both the h1 frequency and the background it is measured against.
  auto fit_error = [](const std::function<double(double, double)>& fit, Frequency f0, Frequency f1) {
    double var = 0.0;
    for (int which = 0; which < 2; ++which) {
      const double s = which == 0 ? f0.sigma : f1.sigma;
      if (!(s > 0.0)) continue;
      try {
        const double up = which == 0 ? fit(f0.p + s, f1.p) : fit(f0.p, f1.p + s);
        const double down = which == 0 ? fit(f0.p - s, f1.p) : fit(f0.p, f1.p - s);
        var += 0.25 * (up - down) * (up - down);
      } catch (const Error&) {
        // One side of the interval has no root; the error is unbounded there.
        var = std::numeric_limits<double>::infinity();
      }
    }
    return std::sqrt(var);
  };

  ShapeFit fit;
  fit.p_h0 = p0.p;
  fit.p_h1_ci = p1_ci.p;
  fit.p_h1_qi = p1_qi.p;
  fit.nbg_s = with_background(p0.p).nbg_s;
  fit.gamma = {fit_gamma(p0.p, p1_ci.p), fit_error(fit_gamma, p0, p1_ci)};
  fit.beta = {fit_beta(p0.p, p1_qi.p), fit_error(fit_beta, p0, p1_qi)};
  return fit;
}

std::string format_calibration_report(const std::vector<CalibrationEntry>& entries) {
  std::string out = "parameter value error method\n";
  char buf[256];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%s %.9g %.3g %s\n", e.parameter.c_str(), e.estimate.value,
                  e.estimate.error, e.method.c_str());
    out += buf;
  }
  return out;
}

}  // namespace qlidar
