#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "qlidar/params.hpp"

namespace qlidar {

/// One row of measurements.csv. Averaged columns are NaN (written empty)
/// until a block has accumulated n_av measurements.
struct MeasurementRow {
  std::size_t index = 0;
  Hypothesis hypothesis = Hypothesis::h1;
  std::uint64_t x = 0;  ///< coincidences
  std::uint64_t k = 0;  ///< heralds
  double llv_ci = 0.0;
  double llv_qi = 0.0;
  double llv_ci_avg = 0.0;
  double llv_qi_avg = 0.0;
  std::vector<double> extra;
};

struct MeasurementTable {
  std::vector<std::string> extra_columns;
  std::vector<MeasurementRow> rows;

  /// Index of an extra column; throws Error(format_error) if absent.
  std::size_t column(const std::string& name) const;
};

void write_measurement_csv(std::ostream& out, const MeasurementTable& table);
MeasurementTable read_measurement_csv(std::istream& in);

struct NumericTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

enum class OutputFormat { csv, json };

OutputFormat parse_format(const std::string& s);

void write_table(std::ostream& out, const NumericTable& table, OutputFormat format);

struct RunReport {
  std::string scenario;
  MeasurementTable measurements;
  nlohmann::json summary;   ///< {"empirical": ..., "analytic": ...}
  nlohmann::json metadata;  ///< config hash, seed, version, analysis knobs
  std::map<std::string, NumericTable> tables;
  std::map<std::string, std::string> files;  ///< extra verbatim artefacts
};

/// measurements.csv, summary.{csv,json}, one file per table, metadata.json
/// and the verbatim files. Throws Error(io_error) naming the path.
void write_report(const RunReport& report, const std::filesystem::path& dir, OutputFormat format);

/// The "empirical" summary block computed from measurements.csv alone. The
/// metadata supplies the scenario kind and n_av.
nlohmann::json empirical_summary(const MeasurementTable& table, const nlohmann::json& metadata);

/// Trailing rolling mean of `values` restarted at every change of `block`.
std::vector<double> blockwise_rolling(const std::vector<double>& values, const std::vector<double>& block,
                                      std::size_t n_av);

/// Reads a run directory, recomputes the empirical summary and returns the
/// largest absolute difference against the stored summary.json.
struct RecomputeResult {
  nlohmann::json recomputed;
  double max_abs_diff = 0.0;
};

RecomputeResult recompute_report(const std::filesystem::path& dir);

std::string format_double(double v);

}  // namespace qlidar
