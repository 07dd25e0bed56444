#include <gtest/gtest.h>

#include "qlidar/config.hpp"
#include "qlidar/errors.hpp"

using namespace qlidar;

namespace {

const char* kMinimal = R"(
[scenario]
name = "t"
kind = "detection"

[system]
pair_rate = "6.8 MHz"   # trailing comment
loss_db = 33.5
eta_s = 0.2329
eta_i = 0.1958
signal_background = "1 MHz"
tau_c = "2 ns"
t_int = "100 ms"

[schedule]
hypotheses = ["H1", "H0"]
counts = [30, 40]

[run]
seed = 9
)";

std::string message_of(const std::string& text) {
  try {
    parse_config(text, "cfg.toml");
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, Quantities) {
  EXPECT_DOUBLE_EQ(parse_quantity("6.8 MHz", "Hz"), 6.8e6);
  EXPECT_DOUBLE_EQ(parse_quantity("10kHz", "Hz"), 1e4);
  EXPECT_DOUBLE_EQ(parse_quantity("250 ps", "s"), 250e-12);
  EXPECT_DOUBLE_EQ(parse_quantity("0.1", "s"), 0.1);
  EXPECT_DOUBLE_EQ(parse_quantity("3 us", "s"), 3e-6);
  EXPECT_THROW(parse_quantity("3 MHz", "s"), Error);
  EXPECT_THROW(parse_quantity("fast", "Hz"), Error);
}

TEST(Config, ParsesMinimal) {
  const auto c = parse_config(kMinimal);
  EXPECT_EQ(c.name, "t");
  EXPECT_EQ(c.kind, ScenarioKind::detection);
  EXPECT_DOUBLE_EQ(c.setup.pair_rate, 6.8e6);
  EXPECT_DOUBLE_EQ(c.setup.t_int, 0.1);
  ASSERT_EQ(c.schedule.size(), 2u);
  EXPECT_EQ(c.schedule[1].hypothesis, Hypothesis::h0);
  EXPECT_EQ(c.schedule[1].count, 40u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_DOUBLE_EQ(c.scale, 0.1);
  EXPECT_EQ(c.scaled(40), 4u);
  EXPECT_EQ(c.analysis.n_av, 50u);
}

TEST(Config, ErrorsNameOriginSectionAndField) {
  std::string text = kMinimal;
  text.replace(text.find("loss_db = 33.5"), 14, "loss_db = lots");
  const auto msg = message_of(text);
  EXPECT_NE(msg.find("cfg.toml"), std::string::npos) << msg;
  EXPECT_NE(msg.find("[system] loss_db"), std::string::npos) << msg;
}

TEST(Config, UnknownFieldRejected) {
  const auto msg = message_of(std::string(kMinimal) + "[analysis]\nn_avg = 3\n");
  EXPECT_NE(msg.find("[analysis] n_avg: unknown field"), std::string::npos) << msg;
}

TEST(Config, ScheduleMismatch) {
  std::string text = kMinimal;
  text.replace(text.find("[30, 40]"), 8, "[30]");
  EXPECT_NE(message_of(text).find("[schedule] counts"), std::string::npos);
}

TEST(Config, InvalidSystemReported) {
  std::string text = kMinimal;
  text.replace(text.find("eta_s = 0.2329"), 14, "eta_s = 1.2329");
  EXPECT_NE(message_of(text).find("eta_s"), std::string::npos);
}

TEST(Config, MissingFileNamesPath) {
  try {
    load_config("/no/such/config.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io_error);
    EXPECT_NE(std::string(e.what()).find("/no/such/config.toml"), std::string::npos);
  }
}

TEST(Config, CanonicalFormIgnoresFormatting) {
  std::string spaced = kMinimal;
  spaced.replace(spaced.find("\"6.8 MHz\""), 9, "\"6800 kHz\"");
  const auto a = parse_config(kMinimal);
  const auto b = parse_config(spaced);
  EXPECT_EQ(canonical_form(a), canonical_form(b));
  EXPECT_EQ(fnv1a(canonical_form(a)), fnv1a(canonical_form(b)));
  auto c = a;
  c.seed = 10;
  EXPECT_NE(fnv1a(canonical_form(a)), fnv1a(canonical_form(c)));
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"detection_33db", "detection_52db", "jamming_sinusoid", "jamming_composite", "rangefinding",
                           "calibration"}) {
    const auto c = load_config(std::string(QLIDAR_SOURCE_DIR) + "/configs/" + name + ".toml");
    EXPECT_TRUE(check(c).empty()) << name;
  }
}

TEST(Config, RangefindingPositionsMustNameChannels) {
  const std::string text = std::string(kMinimal) +
                           "[rangefinding]\nlabels = [\"A\"]\ndelays = [\"1 ns\"]\npositions = [\"Z\"]\n"
                           "counts = [5]\n";
  std::string kinded = text;
  kinded.replace(kinded.find("kind = \"detection\""), 18, "kind = \"rangefinding\"");
  EXPECT_NE(message_of(kinded).find("unknown position 'Z'"), std::string::npos);
}
