// One PASS/FAIL line per acceptance criterion, at full measurement counts.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "qlidar/calibration.hpp"
#include "qlidar/config.hpp"
#include "qlidar/llv.hpp"
#include "qlidar/montecarlo.hpp"
#include "qlidar/scenarios.hpp"

using namespace qlidar;
namespace fs = std::filesystem;

namespace {

ScenarioConfig config(const std::string& name, double scale = 1.0) {
  auto c = load_config(fs::path(QLIDAR_SOURCE_DIR) / "configs" / name);
  c.scale = scale;
  return c;
}

double num(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
int passes = 0;

void criterion(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s %d %s | %s | %.1f s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
  (o.pass ? passes : failures) += 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome oracle() {
  const auto sets = oracle_parameter_sets(20, 1);
  double worst = 0.0;
  std::string where;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    Rng rng(RngSeedPolicy{1}.engine(i));
    const auto r = oracle_check(sets[i], 10'000'000, rng);
    for (const auto& q : r.quantities) {
      if (q.name == "p_h0_qi") continue;  // reported by the CLI, not part of the check
      if (std::abs(q.z) > worst) {
        worst = std::abs(q.z);
        where = fmt("set %zu %s", i, q.name.c_str());
      }
    }
  }
  return {worst <= 3.0, fmt("%zu sets, worst |z| = %.2f (%s)", sets.size(), worst, where.c_str())};
}

long double exact_llr(long double p0, long double p1, std::uint64_t k, std::uint64_t x) {
  return static_cast<long double>(x) * (std::log(p1) - std::log(p0)) +
         static_cast<long double>(k - x) * (std::log1p(-p1) - std::log1p(-p0));
}

Outcome llv_exactness() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::uint64_t> kd(0, 10000);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double p0 = std::pow(10.0, -6.0 * u(rng)) * 0.999;
    const double p1 = std::pow(10.0, -6.0 * u(rng)) * 0.999;
    const std::uint64_t k = kd(rng);
    const std::uint64_t x = std::uniform_int_distribution<std::uint64_t>(0, k)(rng);
    const long double want = exact_llr(p0, p1, k, x);
    const double got = llv(x, k, linear_coeffs(p0, p1));
    if (want == 0.0L && got == 0.0) continue;
    worst = std::max(worst, static_cast<double>(std::abs(got - want) / std::abs(want)));
  }
  return {worst <= 1e-9, fmt("10000 tuples, max relative error %.2e", worst)};
}

Outcome detection_33db(double& f_out) {
  const auto r = run_scenario(config("detection_33db.toml"));
  const auto& e = r.summary["empirical"];
  const auto& m = r.summary["model"];
  const double qi = num(e["qi_single"]["phi"]);
  const double ci = num(e["ci_single"]["phi"]);
  const double qi50 = num(e["qi_avg"]["phi"]);
  const double pfa = num(m["qi_avg"]["p_fa"]);
  f_out = num(m["equivalent_averaging_factor"]);
  const bool ok = std::abs(qi - 0.31) <= 0.05 && std::abs(ci - 0.086) <= 0.05 && qi50 >= 0.97 &&
                  pfa >= 5e-4 / 3.0 && pfa <= 5e-4 * 3.0;
  return {ok, fmt("phi_QI %.4f, phi_CI %.4f, phi_QI(N_av=50) %.4f, analytic P_FA(N_av=50) %.3g", qi, ci, qi50, pfa)};
}

Outcome detection_52db() {
  const auto r = run_scenario(config("detection_52db.toml"));
  const auto& e = r.summary["empirical"];
  const double qi = num(e["qi_avg"]["phi"]);
  const double ci = num(e["ci_avg"]["phi"]);
  return {qi > ci && qi >= 0.45 && qi <= 0.90, fmt("N_av=150: phi_QI %.4f, phi_CI %.4f", qi, ci)};
}

Outcome jamming() {
  const auto r = run_scenario(config("jamming_composite.toml"));
  const auto& e = r.summary["empirical"];
  const auto& m = r.summary["model"];
  const double ci = num(e["ci_single"]["phi"]);
  const double ci_avg = num(e["ci_avg"]["phi"]);
  const double tracked = num(e["qi_tracked_single"]["phi"]);
  const double static_model = num(m["qi_single"]["phi"]);
  const double static_emp = num(e["qi_static_single"]["phi"]);
  const double ratio = num(e["sinusoid_ratio"]);
  const bool ok = std::abs(ci) < 0.05 && std::abs(ci_avg) < 0.05 && std::abs(tracked - static_model) <= 0.05 &&
                  ratio <= 0.1 && std::abs(tracked - 0.15) <= 0.07;
  std::string detail = fmt(
      "phi_CI %.4f (avg %.4f), tracked phi_QI %.4f vs static %.4f (empirical %.4f), "
      "sinusoid ratio %.4f, single-shot target 0.15+-0.07",
      ci, ci_avg, tracked, static_model, static_emp, ratio);
  const auto s = run_scenario(config("jamming_sinusoid.toml"));
  detail += fmt("; sinusoid-only run: tracked phi_QI %.4f, ratio %.4f",
                num(s.summary["empirical"]["qi_tracked_single"]["phi"]),
                num(s.summary["empirical"]["sinusoid_ratio"]));
  return {ok, detail};
}

Outcome rangefinding() {
  const auto c = config("rangefinding.toml");
  const auto r = run_scenario(c);
  const double frac = num(r.summary["empirical"]["correct_fraction"]);
  const double worst_block = num(r.summary["empirical"]["worst_block_fraction"]);
  const double want = std::sqrt(2.0) * c.rangefinding.jitter * 1e12;
  bool widths_ok = true;
  std::string widths;
  for (const auto& p : r.summary["model"]["peaks"]) {
    const double s = num(p["sigma_ps"]);
    widths_ok = widths_ok && std::abs(s - want) <= 0.15 * want;
    widths += fmt(" %.0f", s);
  }
  return {worst_block >= 0.95 && widths_ok,
          fmt("correct fraction %.4f (worst block %.4f), peak sigma ps%s vs %.1f", frac, worst_block, widths.c_str(),
              want)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto base = fs::temp_directory_path() / "qlidar_acceptance_determinism";
  fs::remove_all(base);
  std::size_t files = 0;
  bool same = true;
  for (const char* name : {"detection_33db.toml", "jamming_composite.toml", "rangefinding.toml", "calibration.toml"}) {
    auto c = config(name, 0.1);
    c.seed = 7;
    for (const char* d : {"a", "b"}) write_report(run_scenario(c), base / name / d, OutputFormat::csv);
    for (const auto& entry : fs::directory_iterator(base / name / "a")) {
      ++files;
      same = same && slurp(entry.path()) == slurp(base / name / "b" / entry.path().filename());
    }
  }
  fs::remove_all(base);
  return {same && files > 0, fmt("%zu output files compared over 4 scenarios", files)};
}

Outcome calibration() {
  const auto c = config("calibration.toml");
  const auto r = run_calibration(c);
  bool ok = true;
  std::string detail = "z:";
  for (const char* k : {"eta_s", "eta_i", "xi", "beta", "gamma"}) {
    const double z = num(r.summary["model"][k]["z"]);
    ok = ok && std::abs(z) <= 3.0;
    detail += fmt(" %s %.2f", k, z);
  }
  // model-generated data at a bright calibration geometry
  auto bright_setup = c.setup;
  bright_setup.loss_db = 10.0;
  const auto p = make_params(bright_setup);
  CalibrationRun h0{CalibrationConfig::target_absent, {}, p.t_int, p.tau_c};
  CalibrationRun h1{CalibrationConfig::target_present, {}, p.t_int, p.tau_c};
  const RngSeedPolicy seeds{c.seed};
  for (std::size_t i = 0; i < 100; ++i) {
    Rng a = seeds.engine(i), b = seeds.engine(1000 + i);
    h0.measurements.push_back(sample_from_click_model(p, Hypothesis::h0, a));
    h1.measurements.push_back(sample_from_click_model(p, Hypothesis::h1, b));
  }
  const auto fit = fit_shape_params(h0, h1, p, 100);
  ok = ok && std::abs(fit.beta.value - 1.0) <= 0.02 && std::abs(fit.gamma.value - 1.0) <= 0.02;
  detail += fmt("; model data: beta %.4f, gamma %.4f", fit.beta.value, fit.gamma.value);
  return {ok, detail};
}

}  // namespace

int main() {
  double f = std::nan("");
  criterion(1, "oracle equivalence", oracle);
  criterion(2, "linear LLV exactness", llv_exactness);
  criterion(3, "33.5 dB detection", [&] { return detection_33db(f); });
  criterion(4, "52 dB detection", detection_52db);
  criterion(5, "equivalent averaging factor", [&] {
    if (std::isnan(f)) {
      ScenarioConfig c = config("detection_33db.toml");
      const auto p = c.system();
      f = equivalent_averaging_factor(p, p, c.analysis.n_av, c.analysis.roc_points);
    }
    return Outcome{std::abs(f - 17.0) <= 4.0, fmt("f = %.2f", f)};
  });
  criterion(6, "jamming resilience", jamming);
  criterion(7, "rangefinding", rangefinding);
  criterion(8, "determinism", determinism);
  criterion(9, "calibration round trip", calibration);
  std::printf("acceptance finished: %d of %d criteria passed\n", passes, passes + failures);
  return failures;
}
