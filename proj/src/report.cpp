#include "qlidar/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "qlidar/errors.hpp"
#include "qlidar/jamming.hpp"
#include "qlidar/llv.hpp"

namespace qlidar {

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t MeasurementTable::column(const std::string& name) const {
  const auto it = std::find(extra_columns.begin(), extra_columns.end(), name);
  if (it == extra_columns.end()) throw Error(ErrorCode::format_error, "measurements.csv has no column '" + name + "'");
  return static_cast<std::size_t>(it - extra_columns.begin());
}

namespace {

constexpr const char* kBaseColumns[] = {"index", "hypothesis", "x", "k", "llv_ci",
                                        "llv_qi", "llv_ci_avg", "llv_qi_avg"};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
  return v;
}

}  // namespace

void write_measurement_csv(std::ostream& out, const MeasurementTable& table) {
  for (std::size_t i = 0; i < std::size(kBaseColumns); ++i) out << (i ? "," : "") << kBaseColumns[i];
  for (const auto& c : table.extra_columns) out << ',' << c;
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.index << ',' << to_string(r.hypothesis) << ',' << r.x << ',' << r.k << ','
        << format_double(r.llv_ci) << ',' << format_double(r.llv_qi) << ',' << format_double(r.llv_ci_avg)
        << ',' << format_double(r.llv_qi_avg);
    for (double v : r.extra) out << ',' << format_double(v);
    out << '\n';
  }
}

MeasurementTable read_measurement_csv(std::istream& in) {
  MeasurementTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::format_error, "measurements.csv is empty");
  const auto header = split_csv(line);
  const std::size_t base = std::size(kBaseColumns);
  if (header.size() < base || !std::equal(kBaseColumns, kBaseColumns + base, header.begin())) {
    throw Error(ErrorCode::format_error, "line 1: unexpected header");
  }
  table.extra_columns.assign(header.begin() + static_cast<std::ptrdiff_t>(base), header.end());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    try {
      if (cells.size() != header.size()) throw std::invalid_argument("wrong number of fields");
      MeasurementRow r;
      r.index = std::stoull(cells[0]);
      if (cells[1] == "H1") {
        r.hypothesis = Hypothesis::h1;
      } else if (cells[1] == "H0") {
        r.hypothesis = Hypothesis::h0;
      } else {
        throw std::invalid_argument("bad hypothesis");
      }
      r.x = std::stoull(cells[2]);
      r.k = std::stoull(cells[3]);
      r.llv_ci = parse_cell(cells[4]);
      r.llv_qi = parse_cell(cells[5]);
      r.llv_ci_avg = parse_cell(cells[6]);
      r.llv_qi_avg = parse_cell(cells[7]);
      for (std::size_t i = base; i < cells.size(); ++i) r.extra.push_back(parse_cell(cells[i]));
      table.rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::format_error, "measurements.csv line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw Error(ErrorCode::config_error, "format must be csv or json, got '" + s + "'");
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

std::string table_csv(const NumericTable& t) {
  std::ostringstream out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
  return out.str();
}

nlohmann::json table_json(const NumericTable& t) {
  auto rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t i = 0; i < row.size() && i < t.columns.size(); ++i) {
      obj[t.columns[i]] = std::isnan(row[i]) ? nlohmann::json() : nlohmann::json(row[i]);
    }
    rows.push_back(obj);
  }
  return rows;
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
  } else if (j.is_number_float()) {
    out.emplace_back(prefix, format_double(j.get<double>()));
  } else if (j.is_string()) {
    out.emplace_back(prefix, j.get<std::string>());
  } else {
    out.emplace_back(prefix, j.dump());
  }
}

}  // namespace

void write_table(std::ostream& out, const NumericTable& table, OutputFormat format) {
  if (format == OutputFormat::csv) {
    out << table_csv(table);
  } else {
    out << table_json(table).dump(2) << '\n';
  }
}

void write_report(const RunReport& report, const std::filesystem::path& dir, OutputFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());

  std::ostringstream csv;
  write_measurement_csv(csv, report.measurements);
  write_file(dir / "measurements.csv", csv.str());

  if (format == OutputFormat::json) {
    write_file(dir / "summary.json", report.summary.dump(2) + "\n");
    for (const auto& [name, table] : report.tables) write_file(dir / (name + ".json"), table_json(table).dump(2) + "\n");
  } else {
    std::vector<std::pair<std::string, std::string>> flat;
    flatten(report.summary, "", flat);
    std::string out = "key,value\n";
    for (const auto& [k, v] : flat) out += k + "," + v + "\n";
    write_file(dir / "summary.csv", out);
    // The JSON summary is always kept so `report` can compare against it.
    write_file(dir / "summary.json", report.summary.dump(2) + "\n");
    for (const auto& [name, table] : report.tables) write_file(dir / (name + ".csv"), table_csv(table));
  }
  for (const auto& [name, content] : report.files) write_file(dir / name, content);
  write_file(dir / "metadata.json", report.metadata.dump(2) + "\n");
}

std::vector<double> blockwise_rolling(const std::vector<double>& values, const std::vector<double>& block,
                                      std::size_t n_av) {
  std::vector<double> out(values.size(), std::numeric_limits<double>::quiet_NaN());
  std::size_t start = 0;
  while (start < values.size()) {
    std::size_t end = start;
    while (end < values.size() && block[end] == block[start]) ++end;
    if (end - start >= n_av && n_av > 0) {
      LlvSeries s;
      s.values.assign(values.begin() + static_cast<std::ptrdiff_t>(start),
                      values.begin() + static_cast<std::ptrdiff_t>(end));
      const auto avg = rolling_average(s, n_av);
      std::copy(avg.values.begin(), avg.values.end(),
                out.begin() + static_cast<std::ptrdiff_t>(start + n_av - 1));
    }
    start = end;
  }
  return out;
}

namespace {


struct Split {
  LlvSeries h1;
  LlvSeries h0;
};

template <class Pred, class Value>
Split split_by_hypothesis(const MeasurementTable& t, Pred keep, Value value) {
  Split s;
  for (const auto& r : t.rows) {
    if (!keep(r)) continue;
    const double v = value(r);
    if (std::isnan(v)) continue;
    (r.hypothesis == Hypothesis::h1 ? s.h1 : s.h0).values.push_back(v);
  }
  return s;
}

nlohmann::json rates_json(const Split& s, double threshold) {
  if (s.h1.empty() || s.h0.empty()) return nullptr;
  const auto r = empirical_rates(s.h1, s.h0, threshold);
  return {{"phi", r.distinguishability()}, {"p_d", r.p_d}, {"p_fa", r.p_fa},
          {"phi_optimal", optimal_distinguishability(s.h1, s.h0).phi}};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

nlohmann::json detection_summary(const MeasurementTable& t, const nlohmann::json& meta) {
  const double thr = meta.value("threshold", 0.0);
  const double t_int = meta.value("t_int", 0.1);
  auto all = [](const MeasurementRow&) { return true; };
  nlohmann::json j;
  j["qi_single"] = rates_json(split_by_hypothesis(t, all, [](auto& r) { return r.llv_qi; }), thr);
  j["ci_single"] = rates_json(split_by_hypothesis(t, all, [](auto& r) { return r.llv_ci; }), thr);
  j["qi_avg"] = rates_json(split_by_hypothesis(t, all, [](auto& r) { return r.llv_qi_avg; }), thr);
  j["ci_avg"] = rates_json(split_by_hypothesis(t, all, [](auto& r) { return r.llv_ci_avg; }), thr);
  const std::size_t xc = t.column("x_ci");
  std::vector<double> s1, s0, acc;
  for (const auto& r : t.rows) {
    (r.hypothesis == Hypothesis::h1 ? s1 : s0).push_back(r.extra[xc]);
    if (r.hypothesis == Hypothesis::h0) acc.push_back(static_cast<double>(r.x));
  }
  j["snr_ci"] = (mean_of(s1) - mean_of(s0)) / mean_of(s0);
  j["signal_rate_hz"] = (mean_of(s1) - mean_of(s0)) / t_int;
  j["accidental_rate_hz"] = mean_of(acc) / t_int;
  j["n_h1"] = s1.size();
  j["n_h0"] = s0.size();
  return j;
}

nlohmann::json jamming_summary(const MeasurementTable& t, const nlohmann::json& meta) {
  const double thr = meta.value("threshold", 0.0);
  const double period = meta.value("period", 1.0);
  const std::size_t st = t.column("static");
  const std::size_t tracked = t.column("llv_qi_tracked");
  const std::size_t tracked_avg = t.column("llv_qi_tracked_avg");
  auto jammed = [st](const MeasurementRow& r) { return r.extra[st] == 0.0; };
  auto reference = [st](const MeasurementRow& r) { return r.extra[st] != 0.0; };
  nlohmann::json j;
  j["ci_single"] = rates_json(split_by_hypothesis(t, jammed, [](auto& r) { return r.llv_ci; }), thr);
  j["ci_avg"] = rates_json(split_by_hypothesis(t, jammed, [](auto& r) { return r.llv_ci_avg; }), thr);
  j["qi_untracked_single"] = rates_json(split_by_hypothesis(t, jammed, [](auto& r) { return r.llv_qi; }), thr);
  j["qi_untracked_avg"] = rates_json(split_by_hypothesis(t, jammed, [](auto& r) { return r.llv_qi_avg; }), thr);
  j["qi_tracked_single"] =
      rates_json(split_by_hypothesis(t, jammed, [&](auto& r) { return r.extra[tracked]; }), thr);
  j["qi_tracked_avg"] =
      rates_json(split_by_hypothesis(t, jammed, [&](auto& r) { return r.extra[tracked_avg]; }), thr);
  j["qi_static_single"] = rates_json(split_by_hypothesis(t, reference, [](auto& r) { return r.llv_qi; }), thr);
  j["qi_static_avg"] = rates_json(split_by_hypothesis(t, reference, [](auto& r) { return r.llv_qi_avg; }), thr);
  j["ci_static_single"] = rates_json(split_by_hypothesis(t, reference, [](auto& r) { return r.llv_ci; }), thr);

  // Per jammed block: CI zero crossings and sinusoid residuals of both QI series.
  const std::size_t blk = t.column("block");
  const std::size_t time = t.column("time");
  auto blocks = nlohmann::json::array();
  std::size_t i = 0;
  double amp_u = 0.0, amp_t = 0.0;
  std::size_t n_blocks = 0;
  std::size_t min_crossings = std::numeric_limits<std::size_t>::max();
  while (i < t.rows.size()) {
    std::size_t end = i;
    while (end < t.rows.size() && t.rows[end].extra[blk] == t.rows[i].extra[blk]) ++end;
    if (jammed(t.rows[i])) {
      std::vector<double> ts, untracked, trk, ci_avg;
      for (std::size_t r = i; r < end; ++r) {
        ts.push_back(t.rows[r].extra[time]);
        untracked.push_back(t.rows[r].llv_qi);
        trk.push_back(t.rows[r].extra[tracked]);
        if (!std::isnan(t.rows[r].llv_ci_avg)) ci_avg.push_back(t.rows[r].llv_ci_avg);
      }
      nlohmann::json b;
      b["block"] = t.rows[i].extra[blk];
      b["hypothesis"] = to_string(t.rows[i].hypothesis);
      b["ci_zero_crossings"] = zero_crossings(ci_avg);
      min_crossings = std::min(min_crossings, zero_crossings(ci_avg));
      if (ts.size() >= 3) {
        const double au = fit_sinusoid(ts, untracked, period).amplitude();
        const double at = fit_sinusoid(ts, trk, period).amplitude();
        b["sinusoid_untracked"] = au;
        b["sinusoid_tracked"] = at;
        amp_u += au;
        amp_t += at;
        ++n_blocks;
      }
      blocks.push_back(b);
    }
    i = end;
  }
  j["blocks"] = blocks;
  j["ci_zero_crossings_min"] = min_crossings == std::numeric_limits<std::size_t>::max() ? 0 : min_crossings;
  if (n_blocks > 0) {
    j["sinusoid_untracked"] = amp_u / static_cast<double>(n_blocks);
    j["sinusoid_tracked"] = amp_t / static_cast<double>(n_blocks);
    j["sinusoid_ratio"] = amp_t / amp_u;
  }
  return j;
}

nlohmann::json rangefinding_summary(const MeasurementTable& t, const nlohmann::json& meta) {
  const std::size_t blk = t.column("block");
  const std::size_t chan = t.column("channel");
  const std::size_t pos = t.column("position");
  const std::size_t meas = t.column("measurement");
  const auto labels = meta.value("channels", std::vector<std::string>{});
  const std::size_t n_ch = labels.size();

  // Rows come grouped by measurement, one row per channel.
  auto blocks = nlohmann::json::array();
  std::size_t correct_total = 0, judged_total = 0;
  double worst = 1.0;
  std::size_t i = 0;
  while (i < t.rows.size()) {
    const double b = t.rows[i].extra[blk];
    std::size_t correct = 0, judged = 0, measurements = 0;
    std::vector<std::size_t> positive(n_ch, 0);
    while (i < t.rows.size() && t.rows[i].extra[blk] == b) {
      const double m = t.rows[i].extra[meas];
      bool ok = true;
      bool ready = true;
      std::size_t j = i;
      for (; j < t.rows.size() && t.rows[j].extra[meas] == m; ++j) {
        const auto& r = t.rows[j];
        if (std::isnan(r.llv_qi_avg)) {
          ready = false;
          continue;
        }
        const bool matched = r.extra[chan] == r.extra[pos];
        if (r.llv_qi_avg > 0.0) ++positive[static_cast<std::size_t>(r.extra[chan])];
        ok = ok && (matched ? r.llv_qi_avg > 0.0 : r.llv_qi_avg < 0.0);
      }
      ++measurements;
      if (ready) {
        ++judged;
        correct += ok;
      }
      i = j;
    }
    const double frac = judged ? static_cast<double>(correct) / static_cast<double>(judged) : 0.0;
    worst = std::min(worst, frac);
    correct_total += correct;
    judged_total += judged;
    nlohmann::json e;
    e["block"] = b;
    e["measurements"] = measurements;
    e["judged"] = judged;
    e["correct_fraction"] = frac;
    e["positive_counts"] = positive;
    blocks.push_back(e);
  }
  nlohmann::json j;
  j["blocks"] = blocks;
  j["correct_fraction"] = judged_total ? static_cast<double>(correct_total) / static_cast<double>(judged_total) : 0.0;
  j["worst_block_fraction"] = worst;
  return j;
}

nlohmann::json calibration_summary(const MeasurementTable& t, const nlohmann::json&) {
  const std::size_t run = t.column("run");
  const std::size_t xc = t.column("x_ci");
  const std::size_t kc = t.column("k_ci");
  std::map<int, std::array<double, 5>> totals;  // measurements, signal, idler, coincidences, windows
  for (const auto& r : t.rows) {
    auto& a = totals[static_cast<int>(r.extra[run])];
    a[0] += 1;
    a[1] += r.extra[xc];
    a[2] += static_cast<double>(r.k);
    a[3] += static_cast<double>(r.x);
    a[4] += r.extra[kc];
  }
  auto runs = nlohmann::json::array();
  for (const auto& [id, a] : totals) {
    runs.push_back({{"run", id}, {"measurements", a[0]}, {"signal_counts", a[1]}, {"idler_counts", a[2]},
                    {"coincidence_counts", a[3]}, {"windows", a[4]}});
  }
  return {{"runs", runs}};
}

}  // namespace

nlohmann::json empirical_summary(const MeasurementTable& table, const nlohmann::json& metadata) {
  const std::string kind = metadata.value("scenario", "detection");
  if (kind == "detection") return detection_summary(table, metadata);
  if (kind == "jamming") return jamming_summary(table, metadata);
  if (kind == "rangefinding") return rangefinding_summary(table, metadata);
  if (kind == "calibration") return calibration_summary(table, metadata);
  throw Error(ErrorCode::format_error, "unknown scenario '" + kind + "' in metadata");
}

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format_error, path.string() + ": " + e.what());
  }
}

void max_diff(const nlohmann::json& a, const nlohmann::json& b, double& worst) {
  if (a.is_number() && b.is_number()) {
    worst = std::max(worst, std::abs(a.get<double>() - b.get<double>()));
  } else if (a.is_object() && b.is_object()) {
    for (const auto& [k, v] : a.items()) {
      if (!b.contains(k)) {
        worst = std::numeric_limits<double>::infinity();
        continue;
      }
      max_diff(v, b.at(k), worst);
    }
  } else if (a.is_array() && b.is_array() && a.size() == b.size()) {
    for (std::size_t i = 0; i < a.size(); ++i) max_diff(a[i], b[i], worst);
  } else if (a != b) {
    worst = std::numeric_limits<double>::infinity();
  }
}

}  // namespace

RecomputeResult recompute_report(const std::filesystem::path& dir) {
  const auto metadata = read_json(dir / "metadata.json");
  const auto summary = read_json(dir / "summary.json");
  const auto csv_path = dir / "measurements.csv";
  std::ifstream in(csv_path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + csv_path.string());
  const auto table = read_measurement_csv(in);
  RecomputeResult out;
  out.recomputed = empirical_summary(table, metadata);
  max_diff(out.recomputed, summary.at("empirical"), out.max_abs_diff);
  return out;
}

}  // namespace qlidar
