#include "vocalsym/distance.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "vocalsym/parallel.hpp"

namespace vocalsym {

double dtw(std::span<const double> a, std::span<const double> b, BandRadius band) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) throw std::invalid_argument("dtw of an empty sequence");
  const std::size_t diff = n > m ? n - m : m - n;
  if (band && *band < diff) throw std::invalid_argument("band too narrow for the length difference");
  const std::size_t r = band.value_or(std::max(n, m));
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<double> prev(m + 1, inf), curr(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    std::fill(curr.begin(), curr.end(), inf);
    const std::size_t lo = i > r ? i - r : 1;
    const std::size_t hi = std::min(m, i + r);
    for (std::size_t j = lo; j <= hi; ++j) {
      const double d = a[i - 1] - b[j - 1];
      const double best = std::min({prev[j - 1], prev[j], curr[j - 1]});
      curr[j] = d * d + best;
    }
    std::swap(prev, curr);
  }
  return std::sqrt(prev[m]);
}

Envelope build_envelope(std::span<const double> q, std::size_t r) {
  const std::size_t n = q.size();
  if (n == 0) throw std::invalid_argument("envelope of an empty sequence");
  Envelope env{Series(n), Series(n), r};
  std::deque<std::size_t> up, lo;
  // Window for output i is [i - r, i + r]; feed indices up to i + r.
  std::size_t fed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t right = std::min(n - 1, i + r);
    for (; fed <= right; ++fed) {
      while (!up.empty() && q[up.back()] <= q[fed]) up.pop_back();
      up.push_back(fed);
      while (!lo.empty() && q[lo.back()] >= q[fed]) lo.pop_back();
      lo.push_back(fed);
    }
    const std::size_t left = i > r ? i - r : 0;
    while (up.front() < left) up.pop_front();
    while (lo.front() < left) lo.pop_front();
    env.upper[i] = q[up.front()];
    env.lower[i] = q[lo.front()];
  }
  return env;
}

double lb_keogh(std::span<const double> c, const Envelope& env) {
  if (c.size() != env.upper.size()) throw std::invalid_argument("lb_keogh length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] > env.upper[i]) {
      const double d = c[i] - env.upper[i];
      acc += d * d;
    } else if (c[i] < env.lower[i]) {
      const double d = c[i] - env.lower[i];
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

double symmetric_lb_keogh(std::span<const double> a, const Envelope& env_a,
                          std::span<const double> b, const Envelope& env_b) {
  return std::max(lb_keogh(a, env_b), lb_keogh(b, env_a));
}

double symmetric_lb_keogh(std::span<const double> a, std::span<const double> b, std::size_t r) {
  if (a.size() != b.size()) throw std::invalid_argument("lb_keogh length mismatch");
  return symmetric_lb_keogh(a, build_envelope(a, r), b, build_envelope(b, r));
}

std::size_t band_radius_for(std::size_t length, double fraction) {
  if (fraction < 0.0) throw std::invalid_argument("band fraction must be nonnegative");
  // Subtract a hair so exact products such as 0.1 * 30 do not round up to 4.
  const double raw = fraction * static_cast<double>(length);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
}

namespace {

std::vector<Envelope> envelopes_of(std::span<const Series> set, std::size_t r, std::size_t length,
                                   unsigned workers) {
  std::vector<Envelope> out(set.size());
  parallel_for(set.size(), workers, [&](std::size_t i) {
    if (set[i].size() != length) throw std::invalid_argument("pairwise distances need equal lengths");
    out[i] = build_envelope(set[i], r);
  });
  return out;
}

}  // namespace

DistanceBlock pairwise_distances(std::span<const Series> set_a, std::span<const Series> set_b,
                                 std::size_t r, unsigned workers) {
  DistanceBlock block{set_a.size(), set_b.size(), std::vector<double>(set_a.size() * set_b.size())};
  if (set_a.empty() || set_b.empty()) return block;
  const std::size_t length = set_a.front().size();
  const auto env_a = envelopes_of(set_a, r, length, workers);
  const auto env_b = envelopes_of(set_b, r, length, workers);
  parallel_for(set_a.size(), workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < set_b.size(); ++j) {
      block.values[i * block.cols + j] = symmetric_lb_keogh(set_a[i], env_a[i], set_b[j], env_b[j]);
    }
  });
  return block;
}

CondensedMatrix condensed_distances(std::span<const Series> set, std::size_t r, unsigned workers) {
  CondensedMatrix out(set.size());
  if (set.size() < 2) return out;
  const auto env = envelopes_of(set, r, set.front().size(), workers);
  parallel_for(set.size() - 1, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < set.size(); ++j) {
      out.set(i, j, symmetric_lb_keogh(set[i], env[i], set[j], env[j]));
    }
  });
  return out;
}

}  // namespace vocalsym
