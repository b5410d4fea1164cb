#pragma once

// Brute-force HRV reference used by the unit and acceptance tests. Written from
// the metric definitions without sharing code with the library.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace oracle {

struct Metrics {
  double bpm, ibi, sdnn, mad;
  std::optional<double> sdsd, rmssd, pnn20, pnn50;
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline Metrics metrics(const std::vector<double>& rr) {
  Metrics m{};
  double sum = 0;
  for (double r : rr) sum += r;
  m.ibi = sum / static_cast<double>(rr.size());
  m.bpm = 60000.0 / m.ibi;
  double ss = 0;
  for (double r : rr) ss += (r - m.ibi) * (r - m.ibi);
  m.sdnn = std::sqrt(ss / static_cast<double>(rr.size()));
  const double med = median(rr);
  std::vector<double> dev;
  for (double r : rr) dev.push_back(std::fabs(r - med));
  m.mad = median(dev);

  std::vector<double> d;
  for (std::size_t i = 1; i < rr.size(); ++i) d.push_back(rr[i] - rr[i - 1]);
  if (!d.empty()) {
    double sq = 0, c20 = 0, c50 = 0;
    for (double v : d) {
      sq += v * v;
      if (std::fabs(v) > 20) c20 += 1;
      if (std::fabs(v) > 50) c50 += 1;
    }
    const double k = static_cast<double>(d.size());
    m.rmssd = std::sqrt(sq / k);
    m.pnn20 = c20 / k;
    m.pnn50 = c50 / k;
  }
  if (d.size() >= 2) {
    double md = 0;
    for (double v : d) md += v;
    md /= static_cast<double>(d.size());
    double s2 = 0;
    for (double v : d) s2 += (v - md) * (v - md);
    m.sdsd = std::sqrt(s2 / static_cast<double>(d.size()));
  }
  return m;
}

inline bool rel_close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

}  // namespace oracle
