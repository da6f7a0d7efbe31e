#include "vocalsym/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "vocalsym/io.hpp"
#include "vocalsym/parallel.hpp"
#include "vocalsym/segmentation.hpp"

namespace vocalsym {

const std::vector<std::string>& statistic_names() {
  static const std::vector<std::string> names = {"mean", "std", "skew", "kurtosis", "p5", "p25",
                                                 "p50",  "p75", "p95",  "voiced_fraction", "frame_count"};
  return names;
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const char* measure : {"f0", "spl"}) {
      for (const auto& s : statistic_names()) out.push_back(std::string(measure) + "_" + s);
    }
    return out;
  }();
  return names;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Series measure_statistics(std::span<const double> values, std::size_t frames) {
  if (values.empty()) throw std::invalid_argument("statistics of no frames");
  if (frames < values.size()) throw std::invalid_argument("frame total below measured frame count");
  const auto m = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= m;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= m;
  m3 /= m;
  m4 /= m;
  // A constant series gets exact zeros rather than NaN or rounding noise.
  const bool flat = std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
  if (flat) {
    mean = values.front();
    m2 = 0.0;
  }
  const double skew = flat ? 0.0 : m3 / std::pow(m2, 1.5);
  const double kurt = flat ? 0.0 : m4 / (m2 * m2) - 3.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return {mean,
          std::sqrt(m2),
          skew,
          kurt,
          quantile(sorted, 0.05),
          quantile(sorted, 0.25),
          quantile(sorted, 0.50),
          quantile(sorted, 0.75),
          quantile(sorted, 0.95),
          m / static_cast<double>(frames),
          m};
}

std::vector<FeatureVector> compute_vaf(const RawRecording& rec, const BaselineConfig& config) {
  if (!(rec.sample_rate_hz > 0.0)) throw DataError("recording without a sample rate");
  if (!(config.window_seconds > 0.0) || !(config.frame_ms > 0.0)) {
    throw std::invalid_argument("window and frame lengths must be positive");
  }
  const auto frame = static_cast<std::size_t>(std::llround(config.frame_ms * 1e-3 * rec.sample_rate_hz));
  const auto window = static_cast<std::size_t>(std::llround(config.window_seconds * rec.sample_rate_hz));
  if (frame == 0 || window < frame) throw std::invalid_argument("window shorter than one frame");
  const auto range = PitchRange::from_hz(rec.sample_rate_hz, config.min_pitch_hz, config.max_pitch_hz);
  const auto& cal = rec.calibration;

  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < rec.samples.size(); s += window) {
    if (rec.samples.size() - s >= window || 2 * (rec.samples.size() - s) >= window) starts.push_back(s);
  }
  if (starts.empty()) throw DataError("recording " + rec.id().token() + " is shorter than half a window");

  std::vector<std::optional<FeatureVector>> slots(starts.size());
  parallel_for(starts.size(), config.workers, [&](std::size_t w) {
    const std::size_t begin = starts[w];
    const std::size_t end = std::min(rec.samples.size(), begin + window);
    std::vector<double> f0, spl;
    std::size_t frames = 0;
    for (std::size_t f = begin; f + frame <= end; f += frame) {
      ++frames;
      const std::span<const double> x(rec.samples.data() + f, frame);
      const double level = level_db(x);
      if (!std::isfinite(level) || level < config.level_threshold_db) continue;
      spl.push_back(cal.intercept + cal.slope * level / 20.0);
      try {
        const auto pitch = estimate_pitch(x, range);
        if (!pitch.low_confidence()) f0.push_back(rec.sample_rate_hz / pitch.period_samples);
      } catch (const DataError&) {
      }
    }
    if (f0.empty() || spl.empty()) return;
    FeatureVector v;
    v.id = rec.id();
    v.window = w;
    v.values = measure_statistics(f0, frames);
    const auto s = measure_statistics(spl, frames);
    v.values.insert(v.values.end(), s.begin(), s.end());
    slots[w] = std::move(v);
  });
  std::vector<FeatureVector> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  if (out.empty()) throw DataError("recording " + rec.id().token() + " has no voiced frames");
  return out;
}

FeatureVector compute_maf(std::span<const FeatureVector> windows) {
  if (windows.empty()) throw DataError("per-day mean of no windows");
  FeatureVector out;
  out.id = windows.front().id;
  out.values.assign(windows.front().values.size(), 0.0);
  for (const auto& w : windows) {
    if (w.values.size() != out.values.size()) throw DataError("windows with differing feature counts");
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += w.values[i];
  }
  for (auto& v : out.values) v /= static_cast<double>(windows.size());
  return out;
}

namespace {

// Exact test, so rounding in the column mean cannot fake a spread.
std::vector<char> constant_columns(std::span<const FeatureVector> vectors, std::size_t d) {
  std::vector<char> out(d, 1);
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < d; ++i) out[i] = out[i] && v.values[i] == vectors.front().values[i];
  }
  return out;
}

}  // namespace

std::vector<std::size_t> prune_correlated(std::span<const FeatureVector> vectors, double threshold) {
  if (vectors.empty()) return {};
  const std::size_t d = vectors.front().values.size();
  const auto m = static_cast<double>(vectors.size());
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += v.values[i] / m;
  }
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < d; ++i) sd[i] += (v.values[i] - mean[i]) * (v.values[i] - mean[i]);
  }
  for (auto& s : sd) s = std::sqrt(s);
  const auto flat = constant_columns(vectors, d);
  auto corr = [&](std::size_t a, std::size_t b) {
    if (flat[a] || flat[b]) return 0.0;
    double acc = 0.0;
    for (const auto& v : vectors) acc += (v.values[a] - mean[a]) * (v.values[b] - mean[b]);
    return acc / (sd[a] * sd[b]);
  };
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < d; ++j) {
    bool drop = false;
    for (auto i : kept) {
      if (std::fabs(corr(i, j)) > threshold) {
        drop = true;
        break;
      }
    }
    if (!drop) kept.push_back(j);
  }
  return kept;
}

std::vector<Series> standardize(std::span<const FeatureVector> vectors) {
  std::vector<Series> out;
  if (vectors.empty()) return out;
  const std::size_t d = vectors.front().values.size();
  const auto m = static_cast<double>(vectors.size());
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& v : vectors) {
    if (v.values.size() != d) throw DataError("feature vectors with differing lengths");
    for (std::size_t i = 0; i < d; ++i) mean[i] += v.values[i];
  }
  for (auto& x : mean) x /= m;
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < d; ++i) sd[i] += (v.values[i] - mean[i]) * (v.values[i] - mean[i]);
  }
  for (auto& s : sd) s = std::sqrt(s / m);
  const auto flat = constant_columns(vectors, d);
  for (const auto& v : vectors) {
    Series z(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = flat[i] ? 0.0 : (v.values[i] - mean[i]) / sd[i];
    out.push_back(std::move(z));
  }
  return out;
}

namespace {

double squared_distance(const Series& a, const Series& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

VafClustering cluster_vaf(std::span<const FeatureVector> vectors, std::size_t n, std::uint64_t seed,
                          std::size_t max_iter) {
  if (n < 1 || n > vectors.size()) {
    throw DataError("cluster count " + std::to_string(n) + " outside [1, " + std::to_string(vectors.size()) + "]");
  }
  const auto x = standardize(vectors);
  const std::size_t m = x.size();
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  std::vector<Series> centroids;
  centroids.push_back(x[rng() % m]);
  std::vector<double> nearest(m, std::numeric_limits<double>::infinity());
  while (centroids.size() < n) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(x[i], centroids.back()));
      total += nearest[i];
    }
    std::size_t pick = centroids.size();  // used when all points coincide
    if (total > 0.0) {
      const double target = unit_uniform(rng) * total;
      double acc = 0.0;
      pick = m - 1;
      for (std::size_t i = 0; i < m; ++i) {
        acc += nearest[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
      while (nearest[pick] == 0.0 && pick > 0) --pick;
    }
    centroids.push_back(x[pick]);
  }

  std::vector<std::size_t> labels(m, n);
  std::vector<double> dist(m, 0.0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n; ++c) {
        const double d = squared_distance(x[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      changed |= labels[i] != best;
      labels[i] = best;
      dist[i] = best_d;
    }
    if (!changed) break;
    std::vector<Series> sums(n, Series(x.front().size(), 0.0));
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t t = 0; t < x[i].size(); ++t) sums[labels[i]][t] += x[i][t];
      ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < n; ++c) {
      if (counts[c] == 0) {
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        centroids[c] = x[far];
        dist[far] = 0.0;
        continue;
      }
      for (auto& v : sums[c]) v /= static_cast<double>(counts[c]);
      centroids[c] = std::move(sums[c]);
    }
  }

  VafClustering out;
  out.window_clusters = labels;
  out.days.n = n;
  std::vector<std::string> order;
  std::map<std::string, std::pair<SubjectDayId, std::vector<std::size_t>>> votes;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& id = vectors[i].id;
    const auto key = id.subject + ":" + std::to_string(id.day);
    auto [it, inserted] = votes.try_emplace(key, id, std::vector<std::size_t>(n, 0));
    if (inserted) order.push_back(key);
    ++it->second.second[labels[i]];
  }
  for (const auto& key : order) {
    const auto& [id, counts] = votes.at(key);
    out.days.ids.push_back(id);
    out.days.clusters.push_back(
        static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin()));
  }
  return out;
}

ClusterAssignment cluster_maf(std::span<const FeatureVector> vectors, std::size_t n) {
  if (n < 1 || n > vectors.size()) {
    throw DataError("cluster count " + std::to_string(n) + " outside [1, " + std::to_string(vectors.size()) + "]");
  }
  const auto x = standardize(vectors);
  CondensedMatrix dist(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) dist.set(i, j, std::sqrt(squared_distance(x[i], x[j])));
  }
  std::vector<SubjectDayId> ids;
  for (const auto& v : vectors) ids.push_back(v.id);
  return assignment_from_dendrogram(ward_cluster(dist), std::move(ids), n);
}

std::string feature_csv(std::span<const FeatureVector> vectors) {
  std::string out = "subject,day,label,window";
  for (const auto& name : feature_names()) out += "," + name;
  out += "\n";
  for (const auto& v : vectors) {
    out += v.id.subject + "," + std::to_string(v.id.day) + "," + std::string(to_string(v.id.label)) + "," +
           (v.window ? std::to_string(*v.window) : std::string());
    for (double x : v.values) out += "," + io::format_double(x);
    out += "\n";
  }
  return out;
}

}  // namespace vocalsym
