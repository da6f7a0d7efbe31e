#include "vocalsym/symbolization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "vocalsym/io.hpp"
#include "vocalsym/parallel.hpp"

namespace vocalsym {

void SymbolVector::validate() const {
  if (symbols.empty()) throw DataError("symbol vector " + id.token() + " has no symbols");
  const auto length = centroid_length();
  double total = 0.0;
  for (const auto& s : symbols) {
    if (s.centroid.size() != length || length == 0) {
      throw DataError("symbol vector " + id.token() + " has unequal centroid lengths");
    }
    if (!(s.frequency >= 0.0)) throw DataError("negative symbol frequency in " + id.token());
    total += s.frequency;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw DataError("symbol frequencies of " + id.token() + " do not sum to 1");
  }
}

SymbolVector make_symbol_vector(SubjectDayId id, std::vector<Series> centroids,
                                std::span<const std::size_t> counts) {
  if (centroids.size() != counts.size()) throw std::invalid_argument("centroid/count size mismatch");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (!(total > 0.0)) throw std::invalid_argument("symbol counts are all zero");
  SymbolVector v;
  v.id = std::move(id);
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    if (counts[i] == 0) continue;
    v.symbols.push_back({std::move(centroids[i]), static_cast<double>(counts[i]) / total, counts[i]});
  }
  return v;
}

double Dendrogram::max_height() const {
  double m = 0.0;
  for (const auto& merge : merges) m = std::max(m, merge.height);
  return m;
}

Dendrogram ward_cluster(const CondensedMatrix& distances) {
  const std::size_t n = distances.size();
  Dendrogram dendrogram;
  dendrogram.leaf_count = n;
  if (n < 2) return dendrogram;

  CondensedMatrix sq(n);
  for (std::size_t i = 0; i < sq.data().size(); ++i) {
    const double d = distances.data()[i];
    if (!(d >= 0.0)) throw DataError("ward_cluster: negative or NaN dissimilarity");
    sq.data()[i] = d * d;
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<char> active(n, 1);
  std::vector<std::size_t> size(n, 1), node(n), nn(n, none);
  std::vector<double> nn_dist(n, inf);
  std::iota(node.begin(), node.end(), std::size_t{0});

  // Nearest active neighbour among higher slots; ties keep the lowest slot.
  auto refresh = [&](std::size_t k) {
    nn[k] = none;
    nn_dist[k] = inf;
    for (std::size_t j = k + 1; j < n; ++j) {
      if (!active[j]) continue;
      const double d = sq.get(k, j);
      if (d < nn_dist[k]) {
        nn_dist[k] = d;
        nn[k] = j;
      }
    }
  };
  for (std::size_t k = 0; k + 1 < n; ++k) refresh(k);

  dendrogram.merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = none;
    for (std::size_t k = 0; k < n; ++k) {
      if (active[k] && nn[k] != none && (a == none || nn_dist[k] < nn_dist[a])) a = k;
    }
    const std::size_t b = nn[a];
    const double dab = sq.get(a, b);
    const std::size_t merged_size = size[a] + size[b];
    dendrogram.merges.push_back(
        {std::min(node[a], node[b]), std::max(node[a], node[b]), std::sqrt(dab), merged_size});

    const auto sa = static_cast<double>(size[a]);
    const auto sb = static_cast<double>(size[b]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) continue;
      const auto sk = static_cast<double>(size[k]);
      const double updated =
          ((sa + sk) * sq.get(k, a) + (sb + sk) * sq.get(k, b) - sk * dab) / (sa + sb + sk);
      sq.set(k, a, std::max(0.0, updated));
    }
    active[b] = 0;
    size[a] = merged_size;
    node[a] = n + step;

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a) continue;
      if (nn[k] == a || nn[k] == b) {
        refresh(k);
      } else if (k < a) {
        const double d = sq.get(k, a);
        if (d < nn_dist[k] || (d == nn_dist[k] && a < nn[k])) {
          nn_dist[k] = d;
          nn[k] = a;
        }
      }
    }
    refresh(a);
  }
  return dendrogram;
}

namespace {

DendrogramCut components(const Dendrogram& dendrogram, auto&& apply_merge) {
  const std::size_t n = dendrogram.leaf_count;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::size_t> rep(n + dendrogram.merges.size());
  std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
  for (std::size_t t = 0; t < dendrogram.merges.size(); ++t) {
    const auto& m = dendrogram.merges[t];
    rep[n + t] = rep[m.left];
    if (apply_merge(t, m)) {
      const auto ra = find(rep[m.left]), rb = find(rep[m.right]);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  DendrogramCut cut;
  cut.labels.resize(n);
  std::vector<std::size_t> label_of_root(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t leaf = 0; leaf < n; ++leaf) {
    const auto root = find(leaf);
    if (label_of_root[root] == std::numeric_limits<std::size_t>::max()) label_of_root[root] = cut.k++;
    cut.labels[leaf] = label_of_root[root];
  }
  return cut;
}

}  // namespace

DendrogramCut cut_dendrogram(const Dendrogram& dendrogram, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("cut fraction must lie in (0, 1]");
  if (dendrogram.leaf_count == 0) throw std::invalid_argument("cannot cut an empty dendrogram");
  const double threshold = fraction * dendrogram.max_height();
  return components(dendrogram, [&](std::size_t, const Merge& m) { return m.height <= threshold; });
}

DendrogramCut cut_to_clusters(const Dendrogram& dendrogram, std::size_t clusters) {
  const std::size_t n = dendrogram.leaf_count;
  if (clusters < 1 || clusters > n) {
    throw std::invalid_argument("cluster count must lie in [1, " + std::to_string(n) + "]");
  }
  const std::size_t applied = n - clusters;
  return components(dendrogram, [&](std::size_t t, const Merge&) { return t < applied; });
}

std::vector<std::size_t> subsample_indices(std::size_t count, std::size_t n_sub, std::uint64_t seed) {
  if (n_sub == 0) throw std::invalid_argument("subsample size must be positive");
  if (count == 0) throw DataError("cannot subsample an empty pulse list");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n_sub >= count) return idx;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_sub; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, count - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n_sub);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<PulseSegment> subsample_pulses(std::span<const PulseSegment> pulses, std::size_t n_sub,
                                           std::uint64_t seed) {
  std::vector<PulseSegment> out;
  for (auto i : subsample_indices(pulses.size(), n_sub, seed)) out.push_back(pulses[i]);
  return out;
}

std::vector<Series> centroids_from_labels(std::span<const Series> pulses,
                                          std::span<const std::size_t> members,
                                          std::span<const std::size_t> labels, std::size_t k) {
  if (members.size() != labels.size()) throw std::invalid_argument("member/label size mismatch");
  if (pulses.empty()) throw std::invalid_argument("no pulses");
  const std::size_t length = pulses.front().size();
  std::vector<Series> sums(k, Series(length, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& p = pulses[members[i]];
    auto& s = sums.at(labels[i]);
    for (std::size_t t = 0; t < length; ++t) s[t] += p[t];
    ++counts[labels[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) throw std::invalid_argument("initial cluster " + std::to_string(c) + " is empty");
    for (auto& v : sums[c]) v /= static_cast<double>(counts[c]);
  }
  return sums;
}

namespace {

class Assigner {
 public:
  Assigner(std::span<const Series> pulses, const KMeansConfig& config)
      : pulses_(pulses), config_(config), radius_(band_radius_for(pulses.front().size(), config.band_fraction)) {
    // Pulse envelopes are cached while they fit in a modest budget.
    constexpr std::size_t kCacheDoubles = std::size_t{1} << 24;
    if (config.distance == AssignmentDistance::LbKeogh &&
        2 * pulses.size() * pulses.front().size() <= kCacheDoubles) {
      cache_.resize(pulses.size());
      parallel_for(pulses.size(), config.workers,
                   [&](std::size_t i) { cache_[i] = build_envelope(pulses_[i], radius_); });
    }
  }

  double distance(std::size_t i, const Series& centroid, const Envelope& env,
                  const Envelope* pulse_env) const {
    if (config_.distance == AssignmentDistance::Euclidean) {
      double acc = 0.0;
      for (std::size_t t = 0; t < centroid.size(); ++t) {
        const double d = pulses_[i][t] - centroid[t];
        acc += d * d;
      }
      return std::sqrt(acc);
    }
    return symmetric_lb_keogh(pulses_[i], *pulse_env, centroid, env);
  }

  /// Nearest centroid per pulse (ties -> lowest index) and its distance.
  void assign(const std::vector<Series>& centroids, std::vector<std::size_t>& labels,
              std::vector<double>& dists) const {
    std::vector<Envelope> envs;
    if (config_.distance == AssignmentDistance::LbKeogh) {
      for (const auto& c : centroids) envs.push_back(build_envelope(c, radius_));
    } else {
      envs.resize(centroids.size());
    }
    labels.assign(pulses_.size(), 0);
    dists.assign(pulses_.size(), 0.0);
    parallel_for(pulses_.size(), config_.workers, [&](std::size_t i) {
      Envelope local;
      const Envelope* pe = nullptr;
      if (config_.distance == AssignmentDistance::LbKeogh) {
        if (!cache_.empty()) {
          pe = &cache_[i];
        } else {
          local = build_envelope(pulses_[i], radius_);
          pe = &local;
        }
      }
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_c = 0;
      for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = distance(i, centroids[c], envs[c], pe);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      labels[i] = best_c;
      dists[i] = best;
    });
  }

 private:
  std::span<const Series> pulses_;
  const KMeansConfig& config_;
  std::size_t radius_;
  std::vector<Envelope> cache_;
};

double objective(const std::vector<double>& dists) {
  double acc = 0.0;
  for (double d : dists) acc += d * d;
  return acc;
}

}  // namespace

KMeansResult kmeans(std::span<const Series> pulses, std::vector<Series> centroids,
                    const KMeansConfig& config) {
  const std::size_t k = centroids.size();
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (k > pulses.size()) throw std::invalid_argument("k exceeds the number of pulses");
  const std::size_t length = pulses.front().size();
  for (const auto& p : pulses) {
    if (p.size() != length) throw std::invalid_argument("pulses must share one length");
  }
  for (const auto& c : centroids) {
    if (c.size() != length) throw std::invalid_argument("centroid length differs from pulse length");
  }

  Assigner assigner(pulses, config);
  KMeansResult result;
  std::vector<std::size_t> labels;
  std::vector<double> dists;
  assigner.assign(centroids, labels, dists);
  result.objective_trace.push_back(objective(dists));

  for (std::size_t it = 0; it < config.max_iter; ++it) {
    // Centroid update; sums run in pulse order so results do not depend on workers.
    std::vector<Series> next(k, Series(length, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < pulses.size(); ++i) {
      auto& s = next[labels[i]];
      for (std::size_t t = 0; t < length; ++t) s[t] += pulses[i][t];
      ++counts[labels[i]];
    }
    std::vector<char> taken(pulses.size(), 0);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < pulses.size(); ++i) {
        if (!taken[i] && dists[i] > far_d) {
          far_d = dists[i];
          far = i;
        }
      }
      taken[far] = 1;
      next[c] = pulses[far];
      ++result.reseeded;
    }

    std::vector<std::size_t> next_labels;
    std::vector<double> next_dists;
    assigner.assign(next, next_labels, next_dists);
    const double j = objective(next_dists);
    if (j > result.objective_trace.back()) {
      result.stopped_on_increase = true;
      break;
    }
    ++result.iterations;
    result.objective_trace.push_back(j);
    centroids = std::move(next);
    const bool stable = next_labels == labels;
    labels = std::move(next_labels);
    dists = std::move(next_dists);
    if (stable) {
      result.converged = true;
      break;
    }
  }

  result.counts.assign(k, 0);
  for (auto l : labels) ++result.counts[l];
  result.centroids = std::move(centroids);
  result.assignment = std::move(labels);
  return result;
}

SymbolizationResult symbolize_day(std::span<const PulseSegment> pulses, const SubjectDayId& id,
                                  const SymbolizationConfig& config, std::uint64_t seed) {
  if (pulses.empty()) throw DataError("no pulses to symbolize for " + id.token());
  std::vector<Series> values;
  values.reserve(pulses.size());
  for (const auto& p : pulses) values.push_back(p.values);
  const std::size_t length = values.front().size();
  for (const auto& v : values) {
    if (v.size() != length) throw DataError("pulses of " + id.token() + " are not length-normalized");
  }

  SymbolizationResult result;
  const auto members = subsample_indices(values.size(), config.subsample_size, seed);
  result.subsample_size = members.size();
  DendrogramCut cut;
  if (members.size() < 2) {
    cut.k = 1;
    cut.labels.assign(members.size(), 0);
  } else {
    std::vector<Series> sub;
    sub.reserve(members.size());
    for (auto m : members) sub.push_back(values[m]);
    const auto radius = band_radius_for(length, config.kmeans.band_fraction);
    const auto dendrogram = ward_cluster(condensed_distances(sub, radius, config.kmeans.workers));
    cut = cut_dendrogram(dendrogram, config.cut_fraction);
  }
  result.k = cut.k;
  auto init = centroids_from_labels(values, members, cut.labels, cut.k);
  result.kmeans = kmeans(values, std::move(init), config.kmeans);
  result.vector = make_symbol_vector(id, result.kmeans.centroids, result.kmeans.counts);
  return result;
}

std::string format_symbol_vectors(std::span<const SymbolVector> vectors) {
  std::string out = "# vocalsym symbol vectors v1\n";
  auto join = [](const auto& range, auto&& fmt) {
    std::string s;
    bool first = true;
    for (const auto& v : range) {
      if (!first) s += ',';
      s += fmt(v);
      first = false;
    }
    return s;
  };
  for (const auto& v : vectors) {
    out += "[symbol_vector]\n";
    out += "subject=" + v.id.subject + "\n";
    out += "day=" + std::to_string(v.id.day) + "\n";
    out += "label=" + std::string(to_string(v.id.label)) + "\n";
    out += "k=" + std::to_string(v.k()) + "\n";
    out += "length=" + std::to_string(v.centroid_length()) + "\n";
    out += "frequencies=" + join(v.symbols, [](const Symbol& s) { return io::format_double(s.frequency); }) + "\n";
    out += "counts=" + join(v.symbols, [](const Symbol& s) { return std::to_string(s.count); }) + "\n";
    out += "centroids\n";
    for (const auto& s : v.symbols) {
      out += join(s.centroid, [](double x) { return io::format_double(x); }) + "\n";
    }
    out += "[end]\n";
  }
  return out;
}

std::vector<SymbolVector> parse_symbol_vectors(std::string_view text) {
  std::vector<SymbolVector> out;
  auto lines = io::split(text, '\n');
  std::size_t i = 0;
  auto next_line = [&]() -> std::string_view {
    while (i < lines.size()) {
      auto line = io::trim(lines[i++]);
      if (!line.empty() && line.front() != '#') return line;
    }
    return {};
  };
  auto value_of = [&](std::string_view key) {
    auto line = next_line();
    if (line.substr(0, key.size() + 1) != std::string(key) + "=") {
      throw DataError("symbol vector record: expected '" + std::string(key) + "='");
    }
    return line.substr(key.size() + 1);
  };
  for (auto line = next_line(); !line.empty(); line = next_line()) {
    if (line != "[symbol_vector]") throw DataError("symbol vector record: expected [symbol_vector]");
    SymbolVector v;
    v.id.subject = std::string(value_of("subject"));
    v.id.day = io::parse_int(value_of("day"));
    v.id.label = parse_class_label(value_of("label"));
    const auto k = static_cast<std::size_t>(io::parse_int(value_of("k")));
    const auto length = static_cast<std::size_t>(io::parse_int(value_of("length")));
    auto freqs = io::split(value_of("frequencies"), ',');
    auto counts = io::split(value_of("counts"), ',');
    if (freqs.size() != k || counts.size() != k) throw DataError("symbol vector record: k mismatch");
    if (next_line() != "centroids") throw DataError("symbol vector record: expected centroids");
    for (std::size_t s = 0; s < k; ++s) {
      Symbol sym;
      sym.frequency = io::parse_double(freqs[s]);
      sym.count = static_cast<std::size_t>(io::parse_int(counts[s]));
      for (auto cell : io::split(next_line(), ',')) sym.centroid.push_back(io::parse_double(cell));
      if (sym.centroid.size() != length) throw DataError("symbol vector record: centroid length mismatch");
      v.symbols.push_back(std::move(sym));
    }
    if (next_line() != "[end]") throw DataError("symbol vector record: expected [end]");
    v.validate();
    out.push_back(std::move(v));
  }
  return out;
}

void write_symbol_vectors(const std::filesystem::path& path, std::span<const SymbolVector> vectors) {
  io::write_text_file(path, format_symbol_vectors(vectors));
}

std::vector<SymbolVector> read_symbol_vectors(const std::filesystem::path& path) {
  return parse_symbol_vectors(io::read_text_file(path));
}

}  // namespace vocalsym
