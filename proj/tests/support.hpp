#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "vocalsym/common.hpp"

namespace testsupport {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("vocalsym_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline vocalsym::Series random_series(std::mt19937_64& rng, std::size_t length, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  vocalsym::Series out(length);
  for (auto& v : out) v = u(rng);
  return out;
}

/// DTW by enumerating every monotone warping path (steps right, down,
/// diagonal) inside the band; squared pointwise cost, sqrt of the minimum.
inline double dtw_by_enumeration(const vocalsym::Series& a, const vocalsym::Series& b,
                                 std::size_t band = std::numeric_limits<std::size_t>::max()) {
  const std::size_t n = a.size(), m = b.size();
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    const std::size_t gap = i > j ? i - j : j - i;
    if (gap > band) return;
    acc += (a[i] - b[j]) * (a[i] - b[j]);
    if (i + 1 == n && j + 1 == m) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < n) walk(i + 1, j, acc);
    if (j + 1 < m) walk(i, j + 1, acc);
    if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return std::sqrt(best);
}

/// LB_Keogh straight from the definition: envelope by scanning every window.
inline double lb_keogh_naive(const vocalsym::Series& c, const vocalsym::Series& q, std::size_t r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const std::size_t lo = i > r ? i - r : 0;
    const std::size_t hi = std::min(q.size() - 1, i + r);
    double u = -std::numeric_limits<double>::infinity(), l = std::numeric_limits<double>::infinity();
    for (std::size_t k = lo; k <= hi; ++k) {
      u = std::max(u, q[k]);
      l = std::min(l, q[k]);
    }
    if (c[i] > u) acc += (c[i] - u) * (c[i] - u);
    if (c[i] < l) acc += (c[i] - l) * (c[i] - l);
  }
  return std::sqrt(acc);
}

inline double symmetric_lb_naive(const vocalsym::Series& a, const vocalsym::Series& b, std::size_t r) {
  return std::max(lb_keogh_naive(a, b, r), lb_keogh_naive(b, a, r));
}

}  // namespace testsupport
