#include "triplex/hrv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "triplex/error.hpp"

namespace triplex::hrv {

namespace {

double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double population_stddev(std::span<const double> xs) {
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
}

void require_rate(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw InvalidSignal("sample rate must be positive");
  }
}

}  // namespace

std::size_t RRSeries::accepted_count() const {
  return static_cast<std::size_t>(std::count(accepted.begin(), accepted.end(), true));
}

void AnalysisConfig::validate() const {
  if (!(ma_window_s > 0.0)) throw InvalidConfig("ma_window_s must be > 0");
  if (!(rel_rise >= 0.0)) throw InvalidConfig("rel_rise must be >= 0");
  if (!(rr_outlier_band >= 0.0 && rr_outlier_band < 1.0)) {
    throw InvalidConfig("rr_outlier_band must be in [0, 1)");
  }
  if (!(min_bpm < max_bpm)) throw InvalidConfig("min_bpm must be < max_bpm");
}

std::size_t window_samples(double window_s, double sample_rate_hz) {
  const double n = std::round(window_s * sample_rate_hz);
  return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

Signal rolling_mean(const Signal& signal, double window_s) {
  if (signal.samples.empty()) throw InvalidSignal("empty signal");
  require_rate(signal.sample_rate_hz);
  if (!(window_s > 0.0)) throw InvalidConfig("window must be > 0");

  const std::size_t n = signal.samples.size();
  const std::size_t half = (window_samples(window_s, signal.sample_rate_hz) - 1) / 2;

  Signal out{std::vector<double>(n), signal.sample_rate_hz, signal.start_time_ms};
  // Direct summation per window keeps every element independent of its
  // neighbours' rounding history.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    out.samples[i] = mean_of(std::span(signal.samples).subspan(lo, hi - lo + 1));
  }
  return out;
}

PeakList detect_peaks(const Signal& signal, const AnalysisConfig& cfg) {
  require_rate(signal.sample_rate_hz);
  const std::size_t n = signal.samples.size();
  const std::size_t min_len = 2 * window_samples(cfg.ma_window_s, signal.sample_rate_hz);
  if (n == 0 || n < min_len) {
    throw InvalidSignal("signal has " + std::to_string(n) + " samples, need at least " +
                        std::to_string(min_len));
  }

  const Signal baseline = rolling_mean(signal, cfg.ma_window_s);
  const auto& x = signal.samples;
  auto above = [&](std::size_t i) { return x[i] > baseline.samples[i] * (1.0 + cfg.rel_rise); };

  PeakList peaks;
  std::size_t i = 0;
  while (i < n) {
    if (!above(i)) {
      ++i;
      continue;
    }
    std::size_t best = i;
    for (; i < n && above(i); ++i) {
      if (x[i] > x[best]) best = i;
    }
    // A maximum on the recording boundary is not a confirmed beat: the true
    // crest may lie outside the window.
    if (best != 0 && best != n - 1) peaks.indices.push_back(best);
  }
  return peaks;
}

RRSeries compute_rr(const PeakList& peaks, double sample_rate_hz) {
  require_rate(sample_rate_hz);
  if (peaks.indices.size() < 2) {
    throw InsufficientBeats("need at least 2 peaks, got " + std::to_string(peaks.indices.size()));
  }
  RRSeries rr;
  rr.intervals_ms.reserve(peaks.indices.size() - 1);
  for (std::size_t i = 0; i + 1 < peaks.indices.size(); ++i) {
    const auto gap = static_cast<double>(peaks.indices[i + 1] - peaks.indices[i]);
    rr.intervals_ms.push_back(gap * 1000.0 / sample_rate_hz);
  }
  rr.accepted.assign(rr.intervals_ms.size(), true);
  return rr;
}

RRSeries reject_outliers(const RRSeries& rr, double band) {
  RRSeries out = rr;
  if (rr.intervals_ms.empty()) return out;
  const double m = mean_of(rr.intervals_ms);
  for (std::size_t i = 0; i < rr.intervals_ms.size(); ++i) {
    out.accepted[i] = !(std::abs(rr.intervals_ms[i] - m) > band * m);
  }
  return out;
}

HrvMetrics compute_metrics(const RRSeries& rr) {
  if (rr.accepted.size() != rr.intervals_ms.size()) {
    throw InvalidSignal("accepted mask length differs from interval count");
  }
  std::vector<double> kept;
  kept.reserve(rr.intervals_ms.size());
  for (std::size_t i = 0; i < rr.intervals_ms.size(); ++i) {
    if (rr.accepted[i]) kept.push_back(rr.intervals_ms[i]);
  }
  if (kept.size() < 2) {
    throw InsufficientBeats("need at least 2 accepted intervals, got " +
                            std::to_string(kept.size()));
  }

  HrvMetrics m;
  m.ibi_ms = mean_of(kept);
  m.bpm = 60000.0 / m.ibi_ms;
  m.sdnn_ms = population_stddev(kept);

  std::vector<double> diffs;
  diffs.reserve(kept.size() - 1);
  for (std::size_t i = 0; i + 1 < kept.size(); ++i) diffs.push_back(kept[i + 1] - kept[i]);

  double sq = 0.0;
  std::size_t over20 = 0;
  std::size_t over50 = 0;
  for (double d : diffs) {
    sq += d * d;
    if (std::abs(d) > 20.0) ++over20;
    if (std::abs(d) > 50.0) ++over50;
  }
  const auto nd = static_cast<double>(diffs.size());
  m.rmssd_ms = std::sqrt(sq / nd);
  m.pnn20 = static_cast<double>(over20) / nd;
  m.pnn50 = static_cast<double>(over50) / nd;
  if (diffs.size() >= 2) m.sdsd_ms = population_stddev(diffs);

  const double med = median_of(kept);
  std::vector<double> dev;
  dev.reserve(kept.size());
  for (double v : kept) dev.push_back(std::abs(v - med));
  m.mad_ms = median_of(std::move(dev));

  m.beat_count = static_cast<std::int64_t>(kept.size()) + 1;
  double span = 0.0;
  for (double v : rr.intervals_ms) span += v;
  m.window_span_ms = span;
  return m;
}

HrvMetrics analyze(const Signal& signal, const AnalysisConfig& cfg) {
  cfg.validate();
  const PeakList peaks = detect_peaks(signal, cfg);
  RRSeries rr = compute_rr(peaks, signal.sample_rate_hz);
  if (cfg.outlier_rejection) rr = reject_outliers(rr, cfg.rr_outlier_band);
  return compute_metrics(rr);
}

std::vector<std::string> abnormality_flags(const HrvMetrics& m, const AnalysisConfig& cfg) {
  std::vector<std::string> flags;
  if (m.bpm < cfg.min_bpm) flags.emplace_back("bpm_below_min");
  if (m.bpm > cfg.max_bpm) flags.emplace_back("bpm_above_max");
  return flags;
}

std::vector<double> parse_signal_text(std::string_view text) {
  std::vector<double> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.remove_suffix(1);
    }
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty()) continue;
    if (out.empty() && line == "hr") continue;

    double v = 0.0;
    const char* first = line.data();
    if (!line.empty() && line.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, line.data() + line.size(), v);
    if (ec != std::errc{} || ptr != line.data() + line.size() || !std::isfinite(v)) {
      throw InvalidSignal("line " + std::to_string(line_no) + ": not a number: '" +
                          std::string(line) + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<double> load_signal_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidSignal("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_signal_text(ss.str());
}

}  // namespace triplex::hrv
