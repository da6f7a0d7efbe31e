#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vocalsym/common.hpp"

namespace vocalsym {

/// Sakoe-Chiba half-width; nullopt means unconstrained warping.
using BandRadius = std::optional<std::size_t>;

/// Square root of the minimum cumulative squared difference over monotone
/// warping paths with steps (1,0), (0,1), (1,1) and aligned endpoints.
double dtw(std::span<const double> a, std::span<const double> b, BandRadius band = std::nullopt);

struct Envelope {
  Series upper;
  Series lower;
  std::size_t band_radius = 0;
};

/// Sliding max/min over [i-r, i+r] in linear time (monotonic deques).
Envelope build_envelope(std::span<const double> q, std::size_t band_radius);

/// sqrt of the squared excursions of `c` outside `env`.
double lb_keogh(std::span<const double> c, const Envelope& env);

/// max(lb_keogh(a, env(b)), lb_keogh(b, env(a))) given both envelopes.
double symmetric_lb_keogh(std::span<const double> a, const Envelope& env_a,
                          std::span<const double> b, const Envelope& env_b);
double symmetric_lb_keogh(std::span<const double> a, std::span<const double> b, std::size_t band_radius);

/// ceil(fraction * length), the default Sakoe-Chiba radius rule.
std::size_t band_radius_for(std::size_t length, double fraction = 0.1);

/// Row-major |A| x |B| block of symmetric LB_Keogh distances.
struct DistanceBlock {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

DistanceBlock pairwise_distances(std::span<const Series> set_a, std::span<const Series> set_b,
                                 std::size_t band_radius, unsigned workers = 1);

/// Upper triangle (i < j) of a symmetric dissimilarity, row-major.
class CondensedMatrix {
 public:
  CondensedMatrix() = default;
  explicit CondensedMatrix(std::size_t n) : n_(n), values_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

  std::size_t size() const { return n_; }
  double get(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return values_[index(i, j)];
  }
  void set(std::size_t i, std::size_t j, double v) { values_[index(i, j)] = v; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i + 1) / 2 + (j - i - 1);
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

/// Symmetric LB_Keogh over one set (zero diagonal implied).
CondensedMatrix condensed_distances(std::span<const Series> set, std::size_t band_radius,
                                    unsigned workers = 1);

}  // namespace vocalsym
