#pragma once

// Heart-rate-variability analysis: moving-average peak detection, RR
// extraction, outlier rejection and the eight time-domain metrics.
//
// All functions are pure; they may be called concurrently.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace triplex::hrv {

struct Signal {
  std::vector<double> samples;
  double sample_rate_hz = 100.0;
  std::int64_t start_time_ms = 0;
};

struct PeakList {
  std::vector<std::size_t> indices;
};

struct RRSeries {
  std::vector<double> intervals_ms;
  std::vector<bool> accepted;

  std::size_t accepted_count() const;
};

/// Metrics computed over the accepted RR intervals. The successive-difference
/// family is optional: `sdsd_ms` needs at least two differences.
struct HrvMetrics {
  double bpm = 0.0;
  double ibi_ms = 0.0;
  double sdnn_ms = 0.0;
  std::optional<double> sdsd_ms;
  std::optional<double> rmssd_ms;
  std::optional<double> pnn20;
  std::optional<double> pnn50;
  double mad_ms = 0.0;
  std::int64_t beat_count = 0;
  double window_span_ms = 0.0;

  bool operator==(const HrvMetrics&) const = default;
};

struct AnalysisConfig {
  double ma_window_s = 0.75;
  double rel_rise = 0.20;
  double rr_outlier_band = 0.30;
  bool outlier_rejection = true;
  double min_bpm = 40.0;
  double max_bpm = 180.0;

  /// Throws InvalidConfig when an invariant is violated.
  void validate() const;
};

/// Number of samples covered by a window of `window_s` seconds.
std::size_t window_samples(double window_s, double sample_rate_hz);

Signal rolling_mean(const Signal& signal, double window_s);

PeakList detect_peaks(const Signal& signal, const AnalysisConfig& cfg);

RRSeries compute_rr(const PeakList& peaks, double sample_rate_hz);

RRSeries reject_outliers(const RRSeries& rr, double band);

HrvMetrics compute_metrics(const RRSeries& rr);

/// rolling_mean -> detect_peaks -> compute_rr -> reject_outliers -> compute_metrics.
HrvMetrics analyze(const Signal& signal, const AnalysisConfig& cfg);

/// Abnormality flags ("bpm_below_min", "bpm_above_max") for the configured bounds.
std::vector<std::string> abnormality_flags(const HrvMetrics& m, const AnalysisConfig& cfg);

/// Reads the one-amplitude-per-line format; an optional first line "hr" is skipped.
/// Blank lines are ignored. Throws InvalidSignal on a non-numeric line.
std::vector<double> parse_signal_text(std::string_view text);
std::vector<double> load_signal_file(const std::string& path);

}  // namespace triplex::hrv
