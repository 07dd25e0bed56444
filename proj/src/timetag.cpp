#include "qlidar/timetag.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "qlidar/errors.hpp"

namespace qlidar {

std::string to_string(Channel c) { return c == Channel::signal ? "signal" : "idler"; }

bool TimeTagStream::sorted() const {
  return std::is_sorted(events.begin(), events.end(),
                        [](const TimeTag& a, const TimeTag& b) { return a.ps < b.ps; });
}

namespace {

bool tag_less(const TimeTag& a, const TimeTag& b) {
  return a.ps != b.ps ? a.ps < b.ps : a.channel < b.channel;
}

std::int64_t to_ticks(double seconds, double resolution) {
  return static_cast<std::int64_t>(std::llround(seconds / resolution));
}

// Event times of a homogeneous Poisson process on [start, start + duration).
std::vector<double> poisson_times(double rate, double start, double duration, Rng& rng) {
  std::vector<double> t;
  const double mean = rate * duration;
  if (!(mean > 0.0)) return t;
  const auto n = std::poisson_distribution<std::uint64_t>(mean)(rng);
  std::uniform_real_distribution<double> when(start, start + duration);
  t.resize(n);
  for (auto& x : t) x = when(rng);
  return t;
}

}  // namespace

TimeTagStream generate_stream(const SystemParams& params, double target_delay, JitterModel jitter,
                              double duration, Rng& rng, double start) {
  TimeTagStream stream;
  const double res = stream.resolution;
  std::normal_distribution<double> noise(0.0, jitter.sigma > 0.0 ? jitter.sigma : 1.0);
  auto jittered = [&](double t) { return jitter.sigma > 0.0 ? t + noise(rng) : t; };
  auto push = [&](double t, Channel c) {
    stream.events.push_back({static_cast<std::uint64_t>(std::max<std::int64_t>(0, to_ticks(t, res))), c});
  };

  // Thinning a Poisson process gives independent Poisson processes for
  // each (idler kept, signal kept) outcome.
  const double pair_rate = params.n_mean / params.tau_c;
  const double keep_i = params.eta_i;
  const double keep_s = params.xi * params.eta_s;
  for (double t : poisson_times(pair_rate * keep_i * keep_s, start, duration, rng)) {
    push(jittered(t), Channel::idler);
    push(jittered(t + target_delay), Channel::signal);
  }
  for (double t : poisson_times(pair_rate * keep_i * (1.0 - keep_s), start, duration, rng)) {
    push(jittered(t), Channel::idler);
  }
  for (double t : poisson_times(pair_rate * (1.0 - keep_i) * keep_s, start, duration, rng)) {
    push(jittered(t + target_delay), Channel::signal);
  }
  for (double t : poisson_times(params.idler_background_rate(), start, duration, rng)) {
    push(t, Channel::idler);
  }
  for (double t : poisson_times(params.signal_background_rate(), start, duration, rng)) {
    push(t, Channel::signal);
  }
  std::sort(stream.events.begin(), stream.events.end(), tag_less);
  return stream;
}

namespace {

void require_sorted(const TimeTagStream& stream) {
  for (std::size_t i = 1; i < stream.events.size(); ++i) {
    if (stream.events[i].ps < stream.events[i - 1].ps) {
      throw Error(ErrorCode::unsorted_stream, "tag " + std::to_string(i) + " precedes tag " +
                                                  std::to_string(i - 1));
    }
  }
}

struct SplitStream {
  std::vector<std::int64_t> signal;
  std::vector<std::int64_t> idler;
};

SplitStream split(const TimeTagStream& stream) {
  SplitStream s;
  for (const auto& e : stream.events) {
    (e.channel == Channel::signal ? s.signal : s.idler).push_back(static_cast<std::int64_t>(e.ps));
  }
  return s;
}

std::uint64_t trials_per_bin(double width, double window) {
  const double ratio = width / window;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * nearest) return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::floor(ratio));
}

}  // namespace

std::vector<std::vector<MeasurementRecord>> count_coincidences(
    const TimeTagStream& stream, const std::vector<CoincidenceChannel>& channels, BinSpec bins) {
  require_sorted(stream);
  const double res = stream.resolution;
  const auto tags = split(stream);
  const std::int64_t origin = to_ticks(bins.start, res);
  const std::int64_t width = to_ticks(bins.width, res);
  if (width <= 0) throw Error(ErrorCode::invalid_params, "bin width must be positive");

  std::size_t n_bins = bins.count;
  if (n_bins == 0 && !stream.empty()) {
    const auto last = static_cast<std::int64_t>(stream.events.back().ps);
    if (last >= origin) n_bins = static_cast<std::size_t>((last - origin) / width) + 1;
  }
  auto bin_of = [&](std::int64_t t) -> std::ptrdiff_t {
    if (t < origin) return -1;
    const auto b = static_cast<std::size_t>((t - origin) / width);
    return b < n_bins ? static_cast<std::ptrdiff_t>(b) : -1;
  };

  std::vector<MeasurementRecord> base(n_bins);
  for (std::int64_t t : tags.signal) {
    if (auto b = bin_of(t); b >= 0) ++base[static_cast<std::size_t>(b)].signal_counts;
  }
  for (std::int64_t t : tags.idler) {
    if (auto b = bin_of(t); b >= 0) ++base[static_cast<std::size_t>(b)].idler_counts;
  }
  for (auto& r : base) r.background_estimate = static_cast<double>(r.signal_counts) / bins.width;

  std::vector<std::vector<MeasurementRecord>> out;
  out.reserve(channels.size());
  const auto& sig = tags.signal;
  for (const auto& ch : channels) {
    auto records = base;
    const std::uint64_t k = trials_per_bin(bins.width, ch.window);
    for (auto& r : records) r.k_ci = k;

    const std::int64_t d2 = 2 * to_ticks(ch.delay, res);
    const std::int64_t w = to_ticks(ch.window, res);
    std::vector<bool> used(sig.size(), false);
    std::size_t lo = 0;
    for (std::int64_t t : tags.idler) {
      const auto b = bin_of(t);
      const std::int64_t centre2 = 2 * t + d2;
      while (lo < sig.size() && 2 * sig[lo] < centre2 - w) ++lo;
      std::size_t best = sig.size();
      std::int64_t best_dist = 0;
      for (std::size_t j = lo; j < sig.size() && 2 * sig[j] <= centre2 + w; ++j) {
        if (used[j]) continue;
        const std::int64_t dist = std::abs(2 * sig[j] - centre2);
        if (best == sig.size() || dist < best_dist) {
          best = j;
          best_dist = dist;
        }
      }
      if (best == sig.size()) continue;
      used[best] = true;
      if (b >= 0) ++records[static_cast<std::size_t>(b)].coincidence_counts;
    }
    out.push_back(std::move(records));
  }
  return out;
}

DelayHistogram delay_histogram(const TimeTagStream& stream, double lo, double hi, double bin_width) {
  if (!(bin_width > 0.0) || !(hi > lo)) {
    throw Error(ErrorCode::invalid_params, "histogram needs bin_width > 0 and hi > lo");
  }
  require_sorted(stream);
  DelayHistogram hist;
  hist.lo = lo;
  hist.width = bin_width;
  hist.counts.assign(static_cast<std::size_t>(std::ceil((hi - lo) / bin_width - 1e-9)), 0);
  const double res = stream.resolution;
  const std::int64_t lo_t = to_ticks(lo, res);
  const std::int64_t hi_t = to_ticks(hi, res);
  const auto tags = split(stream);
  const auto& sig = tags.signal;
  std::size_t p = 0;
  for (std::int64_t t : tags.idler) {
    while (p < sig.size() && sig[p] < t + lo_t) ++p;
    for (std::size_t j = p; j < sig.size() && sig[j] < t + hi_t; ++j) {
      const double delay = static_cast<double>(sig[j] - t) * res;
      const auto b = static_cast<std::size_t>(std::floor((delay - lo) / bin_width));
      if (b < hist.counts.size()) ++hist.counts[b];
    }
  }
  return hist;
}

namespace {

struct Moments {
  double area = 0.0;
  double mean = 0.0;
  double var = 0.0;
};

Moments windowed_moments(const DelayHistogram& h, double baseline, double lo, double hi) {
  Moments m;
  double sx = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double x = h.center(i);
    if (x < lo || x > hi) continue;
    const double w = static_cast<double>(h.counts[i]) - baseline;
    m.area += w;
    sx += w * x;
  }
  if (!(m.area > 0.0)) return m;
  m.mean = sx / m.area;
  double sxx = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double x = h.center(i);
    if (x < lo || x > hi) continue;
    sxx += (static_cast<double>(h.counts[i]) - baseline) * (x - m.mean) * (x - m.mean);
  }
  m.var = std::max(0.0, sxx / m.area);
  return m;
}

// Variance of a unit normal truncated to [-a, a].
double truncated_variance(double a) {
  const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
  const double mass = std::erf(a / std::sqrt(2.0));
  return 1.0 - 2.0 * a * pdf / mass;
}

}  // namespace

PeakEstimate estimate_peak(const DelayHistogram& hist, double half_width) {
  PeakEstimate est;
  if (hist.counts.empty()) return est;
  const auto peak = static_cast<std::size_t>(
      std::max_element(hist.counts.begin(), hist.counts.end()) - hist.counts.begin());
  const double x0 = hist.center(peak);

  std::vector<double> outside;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    if (std::abs(hist.center(i) - x0) > half_width) outside.push_back(static_cast<double>(hist.counts[i]));
  }
  if (!outside.empty()) {
    const auto mid = outside.begin() + static_cast<std::ptrdiff_t>(outside.size() / 2);
    std::nth_element(outside.begin(), mid, outside.end());
    est.baseline = *mid;
    if (outside.size() % 2 == 0) {
      est.baseline = 0.5 * (est.baseline + *std::max_element(outside.begin(), mid));
    }
  }

  auto m = windowed_moments(hist, est.baseline, x0 - half_width, x0 + half_width);
  est.center = m.mean;
  est.sigma = std::sqrt(m.var);
  est.area = m.area;
  // Tighten to +-3 sigma around the current estimate to shed accidental
  // noise, undoing the truncation bias of a Gaussian peak.
  constexpr double kClip = 3.0;
  for (int iter = 0; iter < 8 && est.sigma > hist.width; ++iter) {
    const double half = std::min(half_width, kClip * est.sigma);
    m = windowed_moments(hist, est.baseline, est.center - half, est.center + half);
    if (!(m.area > 0.0)) break;
    est.center = m.mean;
    est.sigma = std::sqrt(m.var / truncated_variance(half / est.sigma));
  }
  est.area = m.area;
  return est;
}

void write_histogram_csv(std::ostream& out, const DelayHistogram& hist) {
  out << "bin_center_ps,counts\n";
  char buf[64];
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", hist.center(i) * 1e12);
    out << buf << ',' << hist.counts[i] << '\n';
  }
}

namespace {

constexpr std::array<char, 4> kMagic{'Q', 'T', 'A', 'G'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::uint64_t v = 0;
  std::memcpy(&v, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
bool get_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  std::memcpy(&value, &v, sizeof(T));
  return true;
}

void check_monotonic(const TimeTagStream& s) {
  for (std::size_t i = 1; i < s.events.size(); ++i) {
    if (s.events[i].ps < s.events[i - 1].ps) {
      throw Error(ErrorCode::non_monotonic_timestamps,
                  "record " + std::to_string(i) + " at " + std::to_string(s.events[i].ps) +
                      " ticks precedes record " + std::to_string(i - 1) + " at " +
                      std::to_string(s.events[i - 1].ps));
    }
  }
}

Channel channel_from(unsigned value, const std::string& where) {
  if (value > 1) throw Error(ErrorCode::format_error, where + ": unknown channel " + std::to_string(value));
  return static_cast<Channel>(value);
}

TimeTagStream parse_binary(std::istream& in) {
  TimeTagStream s;
  std::uint32_t version = 0;
  std::uint8_t n_channels = 0;
  if (!get_le(in, version) || !get_le(in, s.resolution) || !get_le(in, n_channels)) {
    throw Error(ErrorCode::format_error, "truncated header");
  }
  if (version != kVersion) {
    throw Error(ErrorCode::format_error, "unsupported version " + std::to_string(version));
  }
  if (!(s.resolution > 0.0)) throw Error(ErrorCode::format_error, "resolution must be positive");
  for (unsigned i = 0; i < n_channels; ++i) {
    std::uint8_t id = 0;
    std::uint8_t len = 0;
    std::string name;
    if (!get_le(in, id) || !get_le(in, len)) throw Error(ErrorCode::format_error, "truncated channel map");
    name.resize(len);
    if (len > 0 && !in.read(name.data(), len)) throw Error(ErrorCode::format_error, "truncated channel map");
  }
  std::uint64_t n = 0;
  if (!get_le(in, n)) throw Error(ErrorCode::format_error, "missing record count");
  s.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t ticks = 0;
    std::uint8_t ch = 0;
    if (!get_le(in, ticks) || !get_le(in, ch)) {
      throw Error(ErrorCode::format_error, "record " + std::to_string(i) + ": truncated");
    }
    s.events.push_back({ticks, channel_from(ch, "record " + std::to_string(i))});
  }
  return s;
}

TimeTagStream parse_csv(std::istream& in) {
  TimeTagStream s;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line[0] == '#') {
      const auto eq = line.find("resolution_s=");
      if (eq != std::string::npos) {
        try {
          s.resolution = std::stod(line.substr(eq + 13));
        } catch (const std::exception&) {
          throw Error(ErrorCode::format_error, where + ": bad resolution");
        }
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("timestamp", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::format_error, where + ": expected 'timestamp,channel'");
    const std::string ts = line.substr(0, comma);
    const std::string ch = line.substr(comma + 1);
    TimeTag tag;
    std::size_t used = 0;
    try {
      tag.ps = std::stoull(ts, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != ts.size() || ts[0] == '-') {
      throw Error(ErrorCode::format_error, where + ": bad timestamp '" + ts + "'");
    }
    if (ch == "signal" || ch == "0") {
      tag.channel = Channel::signal;
    } else if (ch == "idler" || ch == "1") {
      tag.channel = Channel::idler;
    } else {
      throw Error(ErrorCode::format_error, where + ": unknown channel '" + ch + "'");
    }
    s.events.push_back(tag);
  }
  return s;
}

}  // namespace

void write_timetags_binary(std::ostream& out, const TimeTagStream& stream) {
  out.write(kMagic.data(), kMagic.size());
  put_le(out, kVersion);
  put_le(out, stream.resolution);
  put_le(out, std::uint8_t{2});
  for (Channel c : {Channel::signal, Channel::idler}) {
    const auto name = to_string(c);
    put_le(out, static_cast<std::uint8_t>(c));
    put_le(out, static_cast<std::uint8_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  put_le(out, static_cast<std::uint64_t>(stream.events.size()));
  for (const auto& e : stream.events) {
    put_le(out, e.ps);
    put_le(out, static_cast<std::uint8_t>(e.channel));
  }
}

void write_timetags_csv(std::ostream& out, const TimeTagStream& stream) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", stream.resolution);
  out << "# resolution_s=" << buf << "\ntimestamp,channel\n";
  for (const auto& e : stream.events) out << e.ps << ',' << to_string(e.channel) << '\n';
}

TimeTagStream parse_timetags(std::istream& in) {
  std::array<char, 4> head{};
  in.read(head.data(), head.size());
  const auto got = in.gcount();
  TimeTagStream s;
  if (got == 4 && head == kMagic) {
    s = parse_binary(in);
  } else {
    in.clear();
    in.seekg(0);
    if (!in) throw Error(ErrorCode::io_error, "stream is not seekable");
    s = parse_csv(in);
  }
  check_monotonic(s);
  return s;
}

TimeTagStream parse_timetags(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  try {
    return parse_timetags(in);
  } catch (const Error& e) {
    const std::string what = e.what();
    throw Error(e.code(), path.string() + ": " + what.substr(what.find(": ") + 2));
  }
}

}  // namespace qlidar
