// qlidar command-line driver.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qlidar/config.hpp"
#include "qlidar/errors.hpp"
#include "qlidar/report.hpp"
#include "qlidar/scenarios.hpp"

namespace fs = std::filesystem;
using namespace qlidar;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  bool full_scale = false;
};

ScenarioConfig prepare(const std::string& path, const Common& o) {
  ScenarioConfig c = load_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.full_scale) c.scale = 1.0;
  const auto issues = check(c);
  if (!issues.empty()) {
    std::string msg = path + ": ";
    for (std::size_t i = 0; i < issues.size(); ++i) msg += (i ? "; " : "") + issues[i];
    throw Error(ErrorCode::config_error, msg);
  }
  return c;
}

fs::path out_dir(const Common& o, const ScenarioConfig& c) {
  return o.out.empty() ? fs::path("runs") / c.name : fs::path(o.out);
}

void print_phi(const nlohmann::json& summary) {
  const auto& e = summary["empirical"];
  for (const char* key : {"qi_single", "ci_single", "qi_avg", "ci_avg"}) {
    if (e.contains(key)) std::printf("  %-10s phi = %.4f\n", key, e[key]["phi"].get<double>());
  }
}

int cmd_run(const std::string& path, const Common& o, bool calibration) {
  auto c = prepare(path, o);
  if (calibration) c.kind = ScenarioKind::calibration;
  const auto report = run_scenario(c);
  const auto dir = out_dir(o, c);
  write_report(report, dir, parse_format(o.format));
  std::printf("%s: %zu measurements -> %s\n", c.name.c_str(), report.measurements.rows.size(), dir.c_str());
  if (calibration) {
    auto it = report.files.find("calibration_report.txt");
    if (it != report.files.end()) std::fputs(it->second.c_str(), stdout);
  } else {
    print_phi(report.summary);
  }
  return 0;
}

int cmd_roc(const std::string& path, const Common& o) {
  const auto c = prepare(path, o);
  const auto fmt = parse_format(o.format);
  for (bool quantum : {true, false}) {
    const auto t = roc_table(c, quantum);
    const std::string stem = quantum ? "roc_qi" : "roc_ci";
    if (o.out.empty()) {
      std::printf("# %s n_av=%zu\n", stem.c_str(), c.analysis.n_av);
      write_table(std::cout, t, fmt);
      continue;
    }
    fs::create_directories(o.out);
    const auto file = fs::path(o.out) / (stem + (fmt == OutputFormat::csv ? ".csv" : ".json"));
    std::ofstream f(file);
    if (!f) throw Error(ErrorCode::io_error, file.string() + ": cannot open for writing");
    write_table(f, t, fmt);
  }
  return 0;
}

int cmd_oracle(std::size_t sets, double windows, std::uint64_t seed, double limit) {
  const auto params = oracle_parameter_sets(sets, seed);
  std::printf("%4s %10s %9s %9s %9s %9s  %s\n", "set", "xi", "n_mean", "nbg_s", "tau_ns", "max_sigma", "worst");
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Rng rng(RngSeedPolicy{seed}.derive(i + 1));
    const auto r = oracle_check(params[i], static_cast<std::uint64_t>(windows), rng);
    const OracleQuantity* w = &r.quantities.front();
    for (const auto& q : r.quantities) {
      if (std::abs(q.z) > std::abs(w->z)) w = &q;
    }
    worst = std::max(worst, r.max_sigma());
    std::printf("%4zu %10.3e %9.3e %9.3e %9.2f %9.2f  %s\n", i, params[i].xi, params[i].n_mean, params[i].nbg_s,
                params[i].tau_c * 1e9, r.max_sigma(), w->name.c_str());
  }
  std::printf("worst deviation: %.2f sigma\n", worst);
  return limit > 0.0 && worst > limit ? 1 : 0;
}

int cmd_report(const std::string& dir) {
  const auto r = recompute_report(dir);
  std::cout << r.recomputed.dump(2) << "\n";
  std::printf("max |recomputed - stored| = %.3g\n", r.max_abs_diff);
  return r.max_abs_diff <= 1e-12 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-illumination lidar simulator"};
  app.set_version_flag("--version", library_version());
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Override the config seed");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--format", common.format, "Table format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--full-scale", common.full_scale, "Use full measurement counts");
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("config", config_path)->required();
  add_common(run);

  auto* calibrate = app.add_subcommand("calibrate", "Run the calibration pipeline on a config's system");
  calibrate->add_option("config", config_path)->required();
  add_common(calibrate);

  auto* roc = app.add_subcommand("roc", "Analytic ROC tables at the configured N_av");
  roc->add_option("config", config_path)->required();
  add_common(roc);

  std::size_t sets = 20;
  double windows = 1e7;
  std::uint64_t oracle_seed = 1;
  double limit = 0.0;
  auto* oracle = app.add_subcommand("oracle-check", "Compare closed-form click probabilities with the sampler");
  oracle->add_option("--sets", sets, "Number of parameter sets");
  oracle->add_option("--windows", windows, "Windows per hypothesis");
  oracle->add_option("--seed", oracle_seed);
  oracle->add_option("--fail-above", limit, "Exit 1 if any deviation exceeds this many sigma");

  std::string run_dir;
  auto* report = app.add_subcommand("report", "Recompute the summary of a run directory from its CSV");
  report->add_option("run-dir", run_dir)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, common, false);
    if (*calibrate) return cmd_run(config_path, common, true);
    if (*roc) return cmd_roc(config_path, common);
    if (*oracle) return cmd_oracle(sets, windows, oracle_seed, limit);
    if (*report) return cmd_report(run_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "qlidar: %s\n", e.what());
    return 2;
  }
  return 0;
}
