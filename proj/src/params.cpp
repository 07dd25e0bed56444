#include "qlidar/params.hpp"

#include <cmath>
#include <sstream>

#include "qlidar/errors.hpp"

namespace qlidar {

std::string to_string(Hypothesis h) { return h == Hypothesis::h1 ? "H1" : "H0"; }

std::uint64_t SystemParams::ci_trials() const {
  if (!(tau_c > 0.0) || !(t_int > 0.0)) return 0;
  const double ratio = t_int / tau_c;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * ratio) return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::floor(ratio));
}

SystemParams SystemParams::with_xi(double value) const {
  SystemParams p = *this;
  p.xi = value;
  return p;
}

SystemParams SystemParams::with_signal_background_rate(double hertz) const {
  SystemParams p = *this;
  p.nbg_s = hertz * tau_c / eta_s;
  return p;
}

SystemParams SystemParams::with_tau_c(double seconds) const {
  // Rates are held fixed; per-window means rescale with the window.
  SystemParams p = *this;
  const double scale = seconds / tau_c;
  p.n_mean *= scale;
  p.nbg_s *= scale;
  p.nbg_i *= scale;
  p.tau_c = seconds;
  return p;
}

double rate_to_mean(RateSpec rate, double tau_c) { return rate.hertz * tau_c; }

double loss_db_to_transmission(double db) { return std::pow(10.0, -db / 10.0); }

bool ValidationReport::contains(const std::string& fragment) const {
  for (const auto& issue : issues) {
    if (issue.find(fragment) != std::string::npos) return true;
  }
  return false;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) out << "; ";
    out << issues[i];
  }
  return out.str();
}

ValidationReport validate(const SystemParams& p) {
  ValidationReport r;
  auto finite_nonneg = [&](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) r.issues.push_back(std::string(name) + " must be nonnegative");
  };
  finite_nonneg(p.n_mean, "n_mean");
  finite_nonneg(p.nbg_s, "nbg_s");
  finite_nonneg(p.nbg_i, "nbg_i");
  if (!std::isfinite(p.xi) || p.xi < 0.0 || p.xi > 1.0) r.issues.push_back("xi out of range [0, 1]");
  if (!std::isfinite(p.eta_s) || p.eta_s <= 0.0 || p.eta_s > 1.0)
    r.issues.push_back("eta_s out of range (0, 1]");
  if (!std::isfinite(p.eta_i) || p.eta_i <= 0.0 || p.eta_i > 1.0)
    r.issues.push_back("eta_i out of range (0, 1]");
  if (!std::isfinite(p.tau_c) || p.tau_c <= 0.0) r.issues.push_back("tau_c must be positive");
  if (!std::isfinite(p.t_int) || p.t_int <= 0.0) {
    r.issues.push_back("t_int must be positive");
  } else if (p.tau_c > 0.0 && p.t_int < p.tau_c) {
    r.issues.push_back("t_int must be at least tau_c");
  }
  if (!std::isfinite(p.gamma) || p.gamma <= 0.0) r.issues.push_back("gamma must be positive");
  if (!std::isfinite(p.beta) || p.beta <= 0.0) r.issues.push_back("beta must be positive");
  return r;
}

void require_valid(const SystemParams& params) {
  const auto report = validate(params);
  if (!report.ok()) throw Error(ErrorCode::invalid_params, report.to_string());
}

SystemParams make_params(const SourceSetup& s) {
  SystemParams p;
  p.tau_c = s.tau_c;
  p.t_int = s.t_int;
  p.eta_s = s.eta_s;
  p.eta_i = s.eta_i;
  p.xi = loss_db_to_transmission(s.loss_db);
  p.n_mean = rate_to_mean({s.pair_rate}, s.tau_c);
  p.nbg_s = rate_to_mean({s.signal_background_rate}, s.tau_c) / s.eta_s;
  p.nbg_i = rate_to_mean({s.idler_background_rate}, s.tau_c) / s.eta_i;
  p.beta = s.beta;
  p.gamma = s.gamma;
  return p;
}

}  // namespace qlidar
