#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qlidar/montecarlo.hpp"
#include "qlidar/params.hpp"

namespace qlidar {

enum class Channel : std::uint8_t { signal = 0, idler = 1 };

std::string to_string(Channel c);

struct TimeTag {
  std::uint64_t ps = 0;
  Channel channel = Channel::signal;

  bool operator==(const TimeTag&) const = default;
};

struct TimeTagStream {
  std::vector<TimeTag> events;
  double resolution = 1e-12;  ///< [s] per tick

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  bool sorted() const;

  bool operator==(const TimeTagStream&) const = default;
};

/// Signal tags whose arrival lies in [t_idler + delay - window/2,
/// t_idler + delay + window/2] form a coincidence on this channel.
struct CoincidenceChannel {
  double delay = 0.0;   ///< [s]
  double window = 0.0;  ///< [s]
  std::string label;
};

/// Independent Gaussian timing error on every detection.
struct JitterModel {
  double sigma = 0.0;  ///< [s]
};

/// Continuous-time tags over [start, start + duration). Pairs are emitted as
/// a Poisson process at n_mean / tau_c; the idler keeps each with probability
/// eta_i, the signal with xi * eta_s and arrives target_delay later. Detected
/// background rates are nbg * eta / tau_c on each arm.
TimeTagStream generate_stream(const SystemParams& params, double target_delay, JitterModel jitter,
                              double duration, Rng& rng, double start = 0.0);

/// Integration bins [start + i*width, start + (i+1)*width), keyed on idler
/// tag time. count = 0 sizes the output to the last tag.
struct BinSpec {
  double width = 0.1;
  double start = 0.0;
  std::size_t count = 0;
};

/// Per channel, one MeasurementRecord per bin: idler_counts is the number of
/// heralds, coincidence_counts the matched heralds, signal_counts all signal
/// tags in the bin and k_ci = floor(width / window).
///
/// Each idler tag matches at most one signal tag per channel and each signal
/// tag is used at most once per channel; the closest unused tag wins.
///
/// Throws Error(unsorted_stream) if the stream is out of order.
std::vector<std::vector<MeasurementRecord>> count_coincidences(
    const TimeTagStream& stream, const std::vector<CoincidenceChannel>& channels, BinSpec bins);

struct DelayHistogram {
  double lo = 0.0;     ///< [s] left edge of bin 0
  double width = 0.0;  ///< [s]
  std::vector<std::uint64_t> counts;

  double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width; }
};

/// Histogram of every signal - idler difference in [lo, hi).
DelayHistogram delay_histogram(const TimeTagStream& stream, double lo, double hi, double bin_width);

struct PeakEstimate {
  double center = 0.0;    ///< [s]
  double sigma = 0.0;     ///< [s]
  double baseline = 0.0;  ///< counts per bin
  double area = 0.0;      ///< counts above baseline
};

/// Peak position and width from baseline-subtracted moments within
/// `half_width` of the tallest bin. The baseline is the median of the bins
/// outside that region.
PeakEstimate estimate_peak(const DelayHistogram& hist, double half_width);

void write_histogram_csv(std::ostream& out, const DelayHistogram& hist);

/// Binary layout (little endian):
///   "QTAG" | u32 version | f64 resolution [s] | u8 n_channels
///   | n_channels x (u8 id, u8 name_len, name) | u64 n_records
///   | n_records x (u64 ticks, u8 channel)
void write_timetags_binary(std::ostream& out, const TimeTagStream& stream);

/// CSV layout: "# resolution_s=<r>" line, "timestamp,channel" header, then
/// rows with integer ticks and a channel name (signal|idler) or id (0|1).
void write_timetags_csv(std::ostream& out, const TimeTagStream& stream);

/// Reads either format (binary is recognised by its magic).
/// Throws Error(format_error) naming the record or line, or
/// Error(non_monotonic_timestamps) naming the first out-of-order record.
TimeTagStream parse_timetags(std::istream& in);
TimeTagStream parse_timetags(const std::filesystem::path& path);

}  // namespace qlidar
