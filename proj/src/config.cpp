#include "qlidar/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include "qlidar/errors.hpp"

namespace qlidar {

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::detection: return "detection";
    case ScenarioKind::jamming: return "jamming";
    case ScenarioKind::rangefinding: return "rangefinding";
    case ScenarioKind::calibration: return "calibration";
  }
  return "unknown";
}

std::size_t ScenarioConfig::scaled(std::size_t count) const {
  if (count == 0) return 0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(count) * scale)));
}

namespace {

std::string trim(std::string s) {
  auto blank = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), blank));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), blank).base(), s.end());
  return s;
}

// Drops a trailing "# comment" that sits outside quotes.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return trim(s.substr(0, i));
  }
  return trim(s);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

struct Scale {
  const char* suffix;
  double factor;
};

constexpr Scale kFrequency[] = {{"GHz", 1e9}, {"MHz", 1e6}, {"kHz", 1e3}, {"Hz", 1.0}};
constexpr Scale kTime[] = {{"ps", 1e-12}, {"ns", 1e-9}, {"us", 1e-6}, {"ms", 1e-3}, {"s", 1.0}};

}  // namespace

double parse_quantity(const std::string& text, const std::string& unit) {
  const std::string s = trim(unquote(trim(text)));
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::config_error, "'" + text + "' is not a number");
  }
  const std::string suffix = trim(s.substr(used));
  if (suffix.empty()) return value;
  const auto* table = unit == "Hz" ? kFrequency : unit == "s" ? kTime : nullptr;
  const std::size_t n = unit == "Hz" ? std::size(kFrequency) : unit == "s" ? std::size(kTime) : 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (suffix == table[i].suffix) return value * table[i].factor;
  }
  throw Error(ErrorCode::config_error, "'" + text + "': unknown unit '" + suffix + "' (expected " +
                                           (unit.empty() ? std::string("no unit") : unit) + ")");
}

namespace {

namespace pt = boost::property_tree;

class Reader {
 public:
  Reader(const pt::ptree& tree, std::string origin) : tree_(tree), origin_(std::move(origin)) {}

  bool has(const std::string& key) const { return tree_.get_child_optional(pt::ptree::path_type(key, '.')).has_value(); }

  std::string raw(const std::string& key) const {
    used_.insert(key);
    return strip_comment(tree_.get<std::string>(pt::ptree::path_type(key, '.')));
  }

  template <class F>
  auto convert(const std::string& key, F&& f) const -> decltype(f(std::string())) {
    try {
      return f(raw(key));
    } catch (const Error& e) {
      fail(key, detail(e));
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? unquote(raw(key)) : fallback;
  }

  double number(const std::string& key, double fallback) const {
    return has(key) ? convert(key, [](const std::string& v) { return parse_quantity(v, ""); }) : fallback;
  }

  double quantity(const std::string& key, const std::string& unit, double fallback) const {
    return has(key) ? convert(key, [&](const std::string& v) { return parse_quantity(v, unit); }) : fallback;
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    return has(key) ? convert(key, [](const std::string& v) { return to_count(v); }) : fallback;
  }

  std::vector<std::string> list(const std::string& key) const {
    if (!has(key)) return {};
    return convert(key, [](const std::string& v) { return split_list(v); });
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) const {
    if (!has(key)) return fallback;
    return convert(key, [](const std::string& v) {
      std::vector<std::size_t> out;
      for (const auto& item : split_list(v)) out.push_back(to_count(item));
      return out;
    });
  }

  std::vector<double> quantities(const std::string& key, const std::string& unit) const {
    if (!has(key)) return {};
    return convert(key, [&](const std::string& v) {
      std::vector<double> out;
      for (const auto& item : split_list(v)) out.push_back(parse_quantity(item, unit));
      return out;
    });
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    const auto dot = key.find('.');
    throw Error(ErrorCode::config_error,
                origin_ + ": [" + key.substr(0, dot) + "] " + key.substr(dot + 1) + ": " + message);
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      for (const auto& [key, value] : body) {
        const std::string full = section + "." + key;
        if (!used_.count(full)) fail(full, "unknown field");
      }
      if (body.empty() && !body.data().empty()) fail(section + ".", "value outside a section");
    }
  }

 private:
  static std::string detail(const Error& e) {
    const std::string what = e.what();
    const auto colon = what.find(": ");
    return colon == std::string::npos ? what : what.substr(colon + 2);
  }

  static std::size_t to_count(const std::string& v) {
    const double x = parse_quantity(v, "");
    if (x < 0.0 || std::floor(x) != x) throw Error(ErrorCode::config_error, "'" + v + "' is not a count");
    return static_cast<std::size_t>(x);
  }

  static std::vector<std::string> split_list(const std::string& v) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
      throw Error(ErrorCode::config_error, "expected a [a, b, ...] list");
    }
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v.substr(1, v.size() - 2));
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(unquote(item));
    }
    return out;
  }

  const pt::ptree& tree_;
  std::string origin_;
  mutable std::set<std::string> used_;
};

Hypothesis parse_hypothesis(const std::string& s) {
  if (s == "H1" || s == "h1") return Hypothesis::h1;
  if (s == "H0" || s == "h0") return Hypothesis::h0;
  throw Error(ErrorCode::config_error, "hypothesis must be H1 or H0, got '" + s + "'");
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::config_error, origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const Reader r(tree, origin);
  ScenarioConfig c;

  c.name = r.text("scenario.name", c.name);
  const std::string kind = r.text("scenario.kind", "detection");
  if (kind == "detection") {
    c.kind = ScenarioKind::detection;
  } else if (kind == "jamming") {
    c.kind = ScenarioKind::jamming;
  } else if (kind == "rangefinding") {
    c.kind = ScenarioKind::rangefinding;
  } else if (kind == "calibration") {
    c.kind = ScenarioKind::calibration;
  } else {
    r.fail("scenario.kind", "unknown scenario '" + kind + "'");
  }

  auto& s = c.setup;
  s.pair_rate = r.quantity("system.pair_rate", "Hz", s.pair_rate);
  s.loss_db = r.number("system.loss_db", s.loss_db);
  s.eta_s = r.number("system.eta_s", s.eta_s);
  s.eta_i = r.number("system.eta_i", s.eta_i);
  s.signal_background_rate = r.quantity("system.signal_background", "Hz", s.signal_background_rate);
  s.idler_background_rate = r.quantity("system.idler_background", "Hz", s.idler_background_rate);
  s.tau_c = r.quantity("system.tau_c", "s", s.tau_c);
  s.t_int = r.quantity("system.t_int", "s", s.t_int);
  s.beta = r.number("system.beta", s.beta);
  s.gamma = r.number("system.gamma", s.gamma);
  c.sampler.dead_time = r.quantity("system.dead_time", "s", 0.0);

  const auto hyps = r.list("schedule.hypotheses");
  const auto counts = r.counts("schedule.counts", {});
  if (hyps.size() != counts.size()) r.fail("schedule.counts", "needs one count per hypothesis");
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    try {
      c.schedule.push_back({parse_hypothesis(hyps[i]), counts[i]});
    } catch (const Error& e) {
      r.fail("schedule.hypotheses", e.what());
    }
  }

  auto& a = c.analysis;
  a.n_av = r.count("analysis.n_av", a.n_av);
  a.n_av_sweep = r.counts("analysis.n_av_sweep", a.n_av_sweep);
  a.roc_points = r.count("analysis.roc_points", a.roc_points);
  a.threshold = r.number("analysis.threshold", a.threshold);
  const std::string probs = r.text("analysis.probabilities", "model");
  if (probs == "model") {
    a.probabilities = ProbabilitySource::model;
  } else if (probs == "empirical") {
    a.probabilities = ProbabilitySource::empirical;
  } else {
    r.fail("analysis.probabilities", "expected model or empirical");
  }
  a.estimation_window = r.count("analysis.estimation_window", a.estimation_window);

  if (r.has("jamming.kind")) {
    c.has_jamming = true;
    const std::string wk = r.text("jamming.kind", "constant");
    if (wk == "constant") {
      c.jamming.kind = WaveformKind::constant;
    } else if (wk == "sinusoid") {
      c.jamming.kind = WaveformKind::sinusoid;
    } else if (wk == "white") {
      c.jamming.kind = WaveformKind::white;
    } else if (wk == "composite") {
      c.jamming.kind = WaveformKind::composite;
    } else {
      r.fail("jamming.kind", "expected constant, sinusoid, white or composite");
    }
    c.jamming.mean_rate = r.quantity("jamming.mean", "Hz", 0.0);
    c.jamming.amplitude = r.quantity("jamming.amplitude", "Hz", 0.0);
    c.jamming.period = r.quantity("jamming.period", "s", 1.0);
    c.jamming.white_sigma = r.quantity("jamming.white_sigma", "Hz", 0.0);
  }

  c.lut.lo = r.quantity("lut.lo", "Hz", c.lut.lo);
  c.lut.hi = r.quantity("lut.hi", "Hz", c.lut.hi);
  c.lut.levels = r.count("lut.levels", c.lut.levels);

  auto& rf = c.rangefinding;
  const auto labels = r.list("rangefinding.labels");
  const auto delays = r.quantities("rangefinding.delays", "s");
  if (labels.size() != delays.size()) r.fail("rangefinding.delays", "needs one delay per label");
  const double window = r.quantity("rangefinding.window", "s", s.tau_c);
  for (std::size_t i = 0; i < labels.size(); ++i) rf.channels.push_back({delays[i], window, labels[i]});
  const auto positions = r.list("rangefinding.positions");
  const auto pos_counts = r.counts("rangefinding.counts", {});
  if (positions.size() != pos_counts.size()) r.fail("rangefinding.counts", "needs one count per position");
  for (std::size_t i = 0; i < positions.size(); ++i) rf.positions.push_back({positions[i], pos_counts[i]});
  rf.jitter = r.quantity("rangefinding.jitter", "s", rf.jitter);
  rf.histogram_bin = r.quantity("rangefinding.histogram_bin", "s", rf.histogram_bin);
  rf.histogram_range = r.quantity("rangefinding.histogram_range", "s", rf.histogram_range);
  rf.peak_half_width = r.quantity("rangefinding.peak_half_width", "s", rf.peak_half_width);

  auto& cal = c.calibration;
  cal.brightness = r.quantity("calibration.brightness", "Hz", cal.brightness);
  cal.dark_signal = r.quantity("calibration.dark_signal", "Hz", cal.dark_signal);
  cal.dark_idler = r.quantity("calibration.dark_idler", "Hz", cal.dark_idler);
  cal.measurements = r.count("calibration.measurements", cal.measurements);
  cal.first_n = r.count("calibration.first_n", cal.first_n);
  const std::string method = r.text("calibration.method", "thermal");
  if (method == "thermal") {
    cal.method = RateMethod::thermal;
  } else if (method == "literal") {
    cal.method = RateMethod::literal;
  } else {
    r.fail("calibration.method", "expected thermal or literal");
  }

  c.seed = static_cast<std::uint64_t>(r.count("run.seed", c.seed));
  c.scale = r.number("run.scale", c.scale);

  r.reject_unknown();
  if (const auto issues = check(c); !issues.empty()) {
    std::string joined;
    for (const auto& i : issues) joined += (joined.empty() ? "" : "; ") + i;
    throw Error(ErrorCode::config_error, origin + ": " + joined);
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::vector<std::string> check(const ScenarioConfig& c) {
  std::vector<std::string> issues;
  if (!(c.setup.loss_db >= 0.0)) issues.emplace_back("[system] loss_db must be nonnegative");
  for (const auto& i : validate(c.system()).issues) issues.push_back("[system] " + i);
  if (!(c.scale > 0.0)) issues.emplace_back("[run] scale must be positive");
  if (c.analysis.n_av == 0) issues.emplace_back("[analysis] n_av must be at least 1");
  const bool scheduled = c.kind == ScenarioKind::detection || c.kind == ScenarioKind::jamming;
  if (scheduled && c.schedule.empty()) issues.emplace_back("[schedule] must list at least one block");
  if (c.has_jamming) {
    for (const auto& i : check(c.jamming)) issues.push_back("[jamming] " + i);
  }
  if (c.kind == ScenarioKind::jamming) {
    if (!c.has_jamming) issues.emplace_back("[jamming] section required");
    if (c.lut.levels < 2 || !(c.lut.hi > c.lut.lo)) issues.emplace_back("[lut] needs lo < hi and levels >= 2");
  }
  if (c.kind == ScenarioKind::rangefinding) {
    if (c.rangefinding.channels.empty()) issues.emplace_back("[rangefinding] needs at least one channel");
    if (c.rangefinding.positions.empty()) issues.emplace_back("[rangefinding] needs at least one position");
    for (const auto& ch : c.rangefinding.channels) {
      if (!(ch.window > 0.0) || ch.delay < 0.0) issues.emplace_back("[rangefinding] channel " + ch.label + " needs window > 0, delay >= 0");
    }
    for (const auto& p : c.rangefinding.positions) {
      const bool known = p.channel == "none" ||
                         std::any_of(c.rangefinding.channels.begin(), c.rangefinding.channels.end(),
                                     [&](const CoincidenceChannel& ch) { return ch.label == p.channel; });
      if (!known) issues.push_back("[rangefinding] unknown position '" + p.channel + "'");
    }
    if (c.rangefinding.jitter < 0.0) issues.emplace_back("[rangefinding] jitter must be nonnegative");
  }
  return issues;
}

std::string canonical_form(const ScenarioConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["kind"] = to_string(c.kind);
  const auto& s = c.setup;
  j["system"] = {{"pair_rate", s.pair_rate}, {"loss_db", s.loss_db}, {"eta_s", s.eta_s},
                 {"eta_i", s.eta_i}, {"signal_background", s.signal_background_rate},
                 {"idler_background", s.idler_background_rate}, {"tau_c", s.tau_c},
                 {"t_int", s.t_int}, {"beta", s.beta}, {"gamma", s.gamma},
                 {"dead_time", c.sampler.dead_time}};
  auto& sched = j["schedule"] = nlohmann::json::array();
  for (const auto& b : c.schedule) sched.push_back({to_string(b.hypothesis), b.count});
  const auto& a = c.analysis;
  j["analysis"] = {{"n_av", a.n_av}, {"n_av_sweep", a.n_av_sweep}, {"roc_points", a.roc_points},
                   {"threshold", a.threshold},
                   {"probabilities", a.probabilities == ProbabilitySource::model ? "model" : "empirical"},
                   {"estimation_window", a.estimation_window}};
  if (c.has_jamming) {
    j["jamming"] = {{"kind", static_cast<int>(c.jamming.kind)}, {"mean", c.jamming.mean_rate},
                    {"amplitude", c.jamming.amplitude}, {"period", c.jamming.period},
                    {"white_sigma", c.jamming.white_sigma}};
  }
  j["lut"] = {{"lo", c.lut.lo}, {"hi", c.lut.hi}, {"levels", c.lut.levels}};
  auto& rf = j["rangefinding"];
  rf["jitter"] = c.rangefinding.jitter;
  rf["histogram_bin"] = c.rangefinding.histogram_bin;
  rf["histogram_range"] = c.rangefinding.histogram_range;
  rf["peak_half_width"] = c.rangefinding.peak_half_width;
  rf["channels"] = nlohmann::json::array();
  for (const auto& ch : c.rangefinding.channels) rf["channels"].push_back({ch.label, ch.delay, ch.window});
  rf["positions"] = nlohmann::json::array();
  for (const auto& p : c.rangefinding.positions) rf["positions"].push_back({p.channel, p.count});
  const auto& cal = c.calibration;
  j["calibration"] = {{"brightness", cal.brightness}, {"dark_signal", cal.dark_signal},
                      {"dark_idler", cal.dark_idler}, {"measurements", cal.measurements},
                      {"method", to_string(cal.method)}, {"first_n", cal.first_n}};
  j["run"] = {{"seed", c.seed}, {"scale", c.scale}};
  return j.dump();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace qlidar
