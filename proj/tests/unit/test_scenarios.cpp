#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qlidar/config.hpp"
#include "qlidar/errors.hpp"
#include "qlidar/llv.hpp"
#include "qlidar/presets.hpp"
#include "qlidar/scenarios.hpp"

using namespace qlidar;
namespace fs = std::filesystem;

namespace {

const std::string kSystem = R"(
[system]
pair_rate = "6.8 MHz"
loss_db = 33.5
eta_s = 0.2329
eta_i = 0.1958
signal_background = "1 MHz"
tau_c = "2 ns"
t_int = "0.1 s"
)";

ScenarioConfig detection(double loss_db = 33.5) {
  auto c = parse_config("[scenario]\nkind = \"detection\"\n" + kSystem +
                        "[schedule]\nhypotheses = [\"H1\", \"H0\"]\ncounts = [400, 400]\n"
                        "[analysis]\nn_av = 10\nn_av_sweep = [1, 10]\n[run]\nscale = 1\n");
  c.setup.loss_db = loss_db;
  return c;
}

ScenarioConfig rangefinding(const std::string& positions, const std::string& counts) {
  return parse_config(R"(
[scenario]
kind = "rangefinding"
[system]
pair_rate = "6.8 MHz"
loss_db = 33.5
eta_s = 0.2329
eta_i = 0.1958
signal_background = "0.1 MHz"
tau_c = "0.2 ns"
t_int = "0.1 s"
[rangefinding]
labels = ["A", "B", "C"]
delays = ["1.77 ns", "2.52 ns", "3.27 ns"]
window = "0.2 ns"
jitter = "250 ps"
positions = )" + positions + "\ncounts = " + counts + R"(
[analysis]
n_av = 20
[run]
scale = 1
)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Proc {
  int status;
  std::string output;
};

Proc run_cli(const std::string& args) {
  const std::string cmd = std::string(QLIDAR_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int st = pclose(pipe);
  return {WEXITSTATUS(st), out};
}

}  // namespace

TEST(Scenarios, DetectionSeparatesHypotheses) {
  const auto r = run_detection_scenario(detection());
  const auto& e = r.summary["empirical"];
  EXPECT_NEAR(e["qi_avg"]["phi"].get<double>(), r.summary["model"]["qi_avg"]["phi"].get<double>(), 0.1);
  EXPECT_GT(e["qi_avg"]["phi"].get<double>(), e["ci_avg"]["phi"].get<double>());
  EXPECT_GT(e["qi_single"]["phi"].get<double>(), e["ci_single"]["phi"].get<double>());
  EXPECT_EQ(r.measurements.rows.size(), 800u);
  EXPECT_TRUE(r.tables.count("roc_qi"));
  EXPECT_TRUE(r.tables.count("phi_vs_nav"));
  const auto p = detection().system();
  EXPECT_DOUBLE_EQ(r.summary["model"]["equivalent_averaging_factor"].get<double>(),
                   equivalent_averaging_factor(p, p, 10));
}

TEST(Scenarios, NoTargetGivesNoDistinguishability) {
  auto c = detection();
  c.setup.loss_db = 400.0;  // xi ~ 1e-40
  const auto r = run_detection_scenario(c);
  const auto& e = r.summary["empirical"];
  EXPECT_LT(std::abs(e["qi_single"]["phi"].get<double>()), 0.1);
  EXPECT_LT(std::abs(e["ci_single"]["phi"].get<double>()), 0.1);
  EXPECT_NEAR(r.summary["model"]["qi_single"]["phi"].get<double>(), 0.0, 1e-9);
}

TEST(Scenarios, EmpiricalProbabilitiesAreUsable) {
  auto c = detection();
  c.analysis.probabilities = ProbabilitySource::empirical;
  c.analysis.estimation_window = 50;
  const auto r = run_detection_scenario(c);
  EXPECT_EQ(r.summary["model"]["probabilities"]["source"], "empirical");
  EXPECT_GT(r.summary["empirical"]["qi_avg"]["phi"].get<double>(), 0.6);
}

TEST(Scenarios, ReproducibleFromConfigAndSeed) {
  const auto c = detection();
  const auto a = run_scenario(c);
  const auto b = run_scenario(c);
  EXPECT_EQ(a.summary, b.summary);
  EXPECT_EQ(a.metadata, b.metadata);
  auto d = c;
  d.seed = 2;
  EXPECT_NE(run_scenario(d).summary["empirical"], a.summary["empirical"]);
}

TEST(Scenarios, JammingWithoutModulationTracksLikeStatic) {
  auto c = parse_config("[scenario]\nkind = \"jamming\"\n" + kSystem +
                        "[schedule]\nhypotheses = [\"H1\", \"H0\"]\ncounts = [200, 200]\n"
                        "[jamming]\nkind = \"constant\"\nmean = \"1.3 MHz\"\n"
                        "[lut]\nlo = \"2.0 MHz\"\nhi = \"2.6 MHz\"\nlevels = 25\n[run]\nscale = 1\n");
  const auto r = run_jamming_scenario(c);
  const auto& e = r.summary["empirical"];
  EXPECT_NEAR(e["qi_tracked_single"]["phi"].get<double>(), e["qi_untracked_single"]["phi"].get<double>(), 0.05);
  EXPECT_NEAR(e["qi_tracked_avg"]["phi"].get<double>(), e["qi_untracked_avg"]["phi"].get<double>(), 0.05);
  EXPECT_TRUE(r.files.count("lut.csv"));
}

TEST(Scenarios, RangefindingPicksMatchingChannel) {
  const auto r = run_rangefinding_scenario(rangefinding("[\"B\"]", "[60]"));
  const auto& e = r.summary["empirical"];
  EXPECT_GE(e["correct_fraction"].get<double>(), 0.95);
  EXPECT_EQ(r.files.size(), 1u);
}

TEST(Scenarios, RangefindingNoTargetAllNegative) {
  const auto r = run_rangefinding_scenario(rangefinding("[\"none\"]", "[60]"));
  const auto& t = r.measurements;
  std::size_t judged = 0;
  for (const auto& row : t.rows) {
    if (std::isnan(row.llv_qi_avg)) continue;
    ++judged;
    EXPECT_LT(row.llv_qi_avg, 0.0);
  }
  EXPECT_GT(judged, 0u);
}

TEST(Scenarios, RangefindingDuplicateChannelsIdentical) {
  auto c = rangefinding("[\"A\"]", "[30]");
  c.rangefinding.channels.push_back(c.rangefinding.channels[0]);
  c.rangefinding.channels.back().label = "A2";
  const auto r = run_rangefinding_scenario(c);
  const auto& rows = r.measurements.rows;
  const std::size_t n = c.rangefinding.channels.size();
  for (std::size_t i = 0; i + n <= rows.size(); i += n) {
    EXPECT_EQ(rows[i].x, rows[i + n - 1].x);
    EXPECT_EQ(rows[i].llv_qi, rows[i + n - 1].llv_qi);
  }
}

TEST(Scenarios, CaptureFraction) {
  EXPECT_NEAR(capture_fraction(0.0, 1.0, 1e-9), 1.0, 1e-12);
  EXPECT_EQ(capture_fraction(0.0, 1.0, 0.0), 1.0);
  EXPECT_EQ(capture_fraction(2.0, 1.0, 0.0), 0.0);
  EXPECT_NEAR(capture_fraction(0.0, 2.0, 1.0), 0.682689492137086, 1e-12);
  const auto p = channel_params(presets::rangefinding(), 0.2e-9, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(p.xi, presets::rangefinding().xi);
}

TEST(Scenarios, CalibrationRecoversTruth) {
  auto c = load_config(std::string(QLIDAR_SOURCE_DIR) + "/configs/calibration.toml");
  const auto r = run_calibration(c);
  for (const char* k : {"eta_s", "eta_i", "xi", "beta", "gamma"}) {
    EXPECT_LT(std::abs(r.summary["model"][k]["z"].get<double>()), 3.0) << k;
  }
  EXPECT_TRUE(r.files.count("calibration_report.txt"));
}

TEST(Scenarios, OracleAgreesOnSmallSweep) {
  const auto sets = oracle_parameter_sets(20, 1);
  ASSERT_EQ(sets.size(), 20u);
  for (const auto& p : sets) EXPECT_TRUE(validate(p).ok());
  Rng rng(4);
  const auto r = oracle_check(sets[3], 1'000'000, rng);
  EXPECT_EQ(r.quantities.size(), 5u);
  EXPECT_LT(r.max_sigma(), 4.5);
}

TEST(Scenarios, RocTableShape) {
  const auto t = roc_table(detection(), true);
  EXPECT_EQ(t.columns.size(), 3u);
  EXPECT_EQ(t.rows.size(), 201u);
}

TEST(Cli, RunTwiceIsByteIdentical) {
  const auto base = fs::temp_directory_path() / "qlidar_cli_test";
  fs::remove_all(base);
  const std::string cfg = std::string(QLIDAR_SOURCE_DIR) + "/configs/detection_33db.toml";
  for (const char* d : {"a", "b"}) {
    const auto p = run_cli("run " + cfg + " --seed 7 --out " + (base / d).string());
    ASSERT_EQ(p.status, 0) << p.output;
  }
  for (const auto& entry : fs::directory_iterator(base / "a")) {
    EXPECT_EQ(slurp(entry.path()), slurp(base / "b" / entry.path().filename())) << entry.path();
  }
  const auto rep = run_cli("report " + (base / "a").string());
  EXPECT_EQ(rep.status, 0) << rep.output;
  fs::remove_all(base);
}

TEST(Cli, MissingConfigNamesPath) {
  const auto p = run_cli("run /no/such/detection.toml");
  EXPECT_NE(p.status, 0);
  EXPECT_NE(p.output.find("/no/such/detection.toml"), std::string::npos) << p.output;
}

TEST(Cli, BadFieldNamesPathAndField) {
  const auto path = fs::temp_directory_path() / "qlidar_bad.toml";
  std::ofstream(path) << "[scenario]\nkind = \"detection\"\n[system]\npair_rate = \"fast\"\n";
  const auto p = run_cli("run " + path.string());
  EXPECT_NE(p.status, 0);
  EXPECT_NE(p.output.find(path.string()), std::string::npos) << p.output;
  EXPECT_NE(p.output.find("[system] pair_rate"), std::string::npos) << p.output;
  fs::remove(path);
}

TEST(Cli, OracleCheckPrintsTable) {
  const auto p = run_cli("oracle-check --sets 3 --windows 200000");
  EXPECT_EQ(p.status, 0) << p.output;
  EXPECT_NE(p.output.find("max_sigma"), std::string::npos);
  EXPECT_NE(p.output.find("worst deviation"), std::string::npos);
}

TEST(Cli, RocWritesJson) {
  const auto out = fs::temp_directory_path() / "qlidar_roc";
  const auto p = run_cli("roc " + std::string(QLIDAR_SOURCE_DIR) + "/configs/detection_33db.toml --format json --out " +
                         out.string());
  EXPECT_EQ(p.status, 0) << p.output;
  EXPECT_TRUE(fs::exists(out / "roc_qi.json"));
  fs::remove_all(out);
}
