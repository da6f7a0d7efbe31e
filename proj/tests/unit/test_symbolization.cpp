#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <numeric>
#include <set>

#include "support.hpp"
#include "vocalsym/symbolization.hpp"

using namespace vocalsym;
using testsupport::TempDir;

namespace {

using Leaves = std::set<std::size_t>;

struct NaiveMerge {
  Leaves a, b;
  double height;
};

// Ward by exhaustive search over explicit centroids: merging A and B costs
// |A||B|/(|A|+|B|) * ||cA - cB||^2 and the reported height is sqrt(2 * cost),
// which equals the plain distance for two singletons.
std::vector<NaiveMerge> ward_naive(const std::vector<Series>& points) {
  std::vector<Leaves> clusters;
  for (std::size_t i = 0; i < points.size(); ++i) clusters.push_back({i});
  auto centroid = [&](const Leaves& c) {
    Series out(points[0].size(), 0.0);
    for (auto i : c) for (std::size_t d = 0; d < out.size(); ++d) out[d] += points[i][d] / c.size();
    return out;
  };
  std::vector<NaiveMerge> merges;
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const auto ci = centroid(clusters[i]), cj = centroid(clusters[j]);
        double sq = 0.0;
        for (std::size_t d = 0; d < ci.size(); ++d) sq += (ci[d] - cj[d]) * (ci[d] - cj[d]);
        const double na = clusters[i].size(), nb = clusters[j].size();
        const double cost = na * nb / (na + nb) * sq;
        if (cost < best) best = cost, bi = i, bj = j;
      }
    }
    merges.push_back({clusters[bi], clusters[bj], std::sqrt(2.0 * best)});
    clusters[bi].insert(clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return merges;
}

CondensedMatrix euclidean(const std::vector<Series>& points) {
  CondensedMatrix m(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      double sq = 0.0;
      for (std::size_t d = 0; d < points[i].size(); ++d) sq += (points[i][d] - points[j][d]) * (points[i][d] - points[j][d]);
      m.set(i, j, std::sqrt(sq));
    }
  }
  return m;
}

// Connected components of the first `steps` merges (or those under `limit`), relabelled by first appearance.
std::vector<std::size_t> partition_after(const Dendrogram& d, auto&& take) {
  const std::size_t n = d.leaf_count;
  std::vector<std::size_t> parent(2 * n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (std::size_t t = 0; t < d.merges.size(); ++t) {
    if (!take(t, d.merges[t])) continue;
    parent[find(d.merges[t].left)] = n + t;
    parent[find(d.merges[t].right)] = n + t;
  }
  std::vector<std::size_t> labels(n), seen;
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = find(i);
    auto it = std::find(seen.begin(), seen.end(), root);
    labels[i] = static_cast<std::size_t>(it - seen.begin());
    if (it == seen.end()) seen.push_back(root);
  }
  return labels;
}

Series shape(int kind, std::size_t length, double shift = 0.0) {
  Series out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(length - 1) + shift;
    switch (kind) {
      case 0: out[i] = std::sin(2.0 * std::numbers::pi * t); break;
      case 1: out[i] = std::exp(-40.0 * (t - 0.5) * (t - 0.5)) * 2.0 - 1.0; break;
      case 2: out[i] = 2.0 * t - 1.0; break;
      default: out[i] = std::cos(6.0 * std::numbers::pi * t); break;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("Ward clustering matches exhaustive centroid search") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + trial % 14;
    std::vector<Series> points;
    for (std::size_t i = 0; i < n; ++i) points.push_back(testsupport::random_series(rng, 1 + trial % 4));
    const auto d = ward_cluster(euclidean(points));
    const auto oracle = ward_naive(points);
    REQUIRE(d.leaf_count == n);
    REQUIRE(d.merges.size() == n - 1);
    std::vector<Leaves> node_leaves;
    for (std::size_t i = 0; i < n; ++i) node_leaves.push_back({i});
    for (std::size_t t = 0; t + 1 < n; ++t) {
      const auto& m = d.merges[t];
      REQUIRE(m.left < node_leaves.size());
      REQUIRE(m.right < node_leaves.size());
      const std::set<Leaves> got = {node_leaves[m.left], node_leaves[m.right]};
      const std::set<Leaves> want = {oracle[t].a, oracle[t].b};
      CHECK(got == want);
      CHECK(m.height == doctest::Approx(oracle[t].height).epsilon(1e-9));
      Leaves merged = node_leaves[m.left];
      merged.insert(node_leaves[m.right].begin(), node_leaves[m.right].end());
      CHECK(m.size == merged.size());
      node_leaves.push_back(merged);
    }
    CHECK(d.max_height() == doctest::Approx(oracle.back().height).epsilon(1e-9));
  }
}

TEST_CASE("Ward on a hand-checked line of points") {
  // 0, 1, 5 on a line: {0,1} at height 1, then sqrt(2 * 2/3 * 4.5^2).
  CondensedMatrix m(3);
  m.set(0, 1, 1.0);
  m.set(0, 2, 5.0);
  m.set(1, 2, 4.0);
  const auto d = ward_cluster(m);
  CHECK(d.merges[0].left == 0);
  CHECK(d.merges[0].right == 1);
  CHECK(d.merges[0].height == doctest::Approx(1.0));
  CHECK(d.merges[1].height == doctest::Approx(std::sqrt(2.0 * 2.0 / 3.0 * 4.5 * 4.5)));
  CHECK(d.merges[1].size == 3);
  CHECK(std::set<std::size_t>{d.merges[1].left, d.merges[1].right} == std::set<std::size_t>{2, 3});
}

TEST_CASE("dendrogram cuts agree with union-find over the merge list") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + trial % 20;
    std::vector<Series> points;
    for (std::size_t i = 0; i < n; ++i) points.push_back(testsupport::random_series(rng, 3));
    const auto d = ward_cluster(euclidean(points));
    for (double fraction : {0.05, 0.3, 0.7, 1.0}) {
      const auto cut = cut_dendrogram(d, fraction);
      const double limit = fraction * d.max_height();
      const auto want = partition_after(d, [&](std::size_t, const Merge& m) { return m.height <= limit; });
      CHECK(cut.labels == want);
      CHECK(cut.k == *std::max_element(want.begin(), want.end()) + 1);
    }
    CHECK(cut_dendrogram(d, 1.0).k == 1);
    for (std::size_t k = 1; k <= n; ++k) {
      const auto cut = cut_to_clusters(d, k);
      CHECK(cut.k == k);
      CHECK(cut.labels == partition_after(d, [&](std::size_t t, const Merge&) { return t < n - k; }));
    }
    CHECK_THROWS_AS(cut_to_clusters(d, n + 1), std::invalid_argument);
  }
}

TEST_CASE("subsampling is sorted, unique and seeded") {
  const auto a = subsample_indices(1000, 50, 42);
  CHECK(a.size() == 50);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  CHECK(a.back() < 1000);
  CHECK(a == subsample_indices(1000, 50, 42));
  CHECK(a != subsample_indices(1000, 50, 43));
  const auto all = subsample_indices(7, 50, 1);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
}

TEST_CASE("k-means recovers separated groups and never raises the objective") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<Series> pulses;
  std::vector<std::size_t> truth;
  for (int i = 0; i < 120; ++i) {
    const int kind = i % 3;
    auto s = shape(kind, 30);
    for (auto& v : s) v += noise(rng);
    pulses.push_back(s);
    truth.push_back(static_cast<std::size_t>(kind));
  }
  for (auto distance : {AssignmentDistance::Euclidean, AssignmentDistance::LbKeogh}) {
    // Seeds: one heavily perturbed pulse per kind.
    std::vector<Series> init = {pulses[0], pulses[1], pulses[2]};
    std::normal_distribution<double> jitter(0.0, 0.4);
    for (auto& c : init) for (auto& v : c) v += jitter(rng);
    KMeansConfig config;
    config.distance = distance;
    const auto result = kmeans(pulses, init, config);
    CHECK(result.iterations >= 1);
    for (std::size_t t = 1; t < result.objective_trace.size(); ++t) {
      CHECK(result.objective_trace[t] <= result.objective_trace[t - 1] + 1e-12);
    }
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < pulses.size(); ++i) pairs.insert({truth[i], result.assignment[i]});
    CHECK(pairs.size() == 3);
    CHECK(std::accumulate(result.counts.begin(), result.counts.end(), std::size_t{0}) == pulses.size());
  }
}

TEST_CASE("Euclidean k-means ends at nearest-centroid assignments and member means") {
  std::mt19937_64 rng(15);
  std::vector<Series> pulses;
  for (int i = 0; i < 80; ++i) pulses.push_back(testsupport::random_series(rng, 6));
  KMeansConfig config;
  config.distance = AssignmentDistance::Euclidean;
  config.max_iter = 1000;
  const auto result = kmeans(pulses, {pulses[0], pulses[1], pulses[2], pulses[3]}, config);
  REQUIRE(result.converged);
  for (std::size_t i = 0; i < pulses.size(); ++i) {
    std::vector<double> d;
    for (const auto& c : result.centroids) {
      double sq = 0.0;
      for (std::size_t j = 0; j < c.size(); ++j) sq += (pulses[i][j] - c[j]) * (pulses[i][j] - c[j]);
      d.push_back(sq);
    }
    CHECK(d[result.assignment[i]] <= *std::min_element(d.begin(), d.end()) + 1e-12);
  }
  for (std::size_t c = 0; c < result.centroids.size(); ++c) {
    Series mean(6, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < pulses.size(); ++i) {
      if (result.assignment[i] != c) continue;
      ++count;
      for (std::size_t j = 0; j < 6; ++j) mean[j] += pulses[i][j];
    }
    CHECK(count == result.counts[c]);
    for (std::size_t j = 0; j < 6; ++j) CHECK(result.centroids[c][j] == doctest::Approx(mean[j] / count).epsilon(1e-9));
  }
}

TEST_CASE("k-means reseeds an empty cluster") {
  std::vector<Series> pulses = {{0.0, 0.0}, {0.1, 0.0}, {5.0, 5.0}, {5.1, 5.0}};
  KMeansConfig config;
  config.distance = AssignmentDistance::Euclidean;
  const auto result = kmeans(pulses, {{0.0, 0.0}, {0.05, 0.0}, {100.0, 100.0}}, config);
  CHECK(result.reseeded >= 1);
  for (auto c : result.counts) CHECK(c > 0);
  CHECK_THROWS_AS(kmeans(pulses, {{0.0, 0.0, 0.0}}, config), std::invalid_argument);
}

TEST_CASE("symbolizing a day finds the shape alphabet and its frequencies") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.03);
  std::vector<PulseSegment> pulses;
  const std::array<int, 3> share = {50, 30, 20};
  for (int kind = 0; kind < 3; ++kind) {
    for (int i = 0; i < share[kind]; ++i) {
      PulseSegment p;
      p.values = shape(kind, 40);
      for (auto& v : p.values) v += noise(rng);
      pulses.push_back(p);
    }
  }
  std::shuffle(pulses.begin(), pulses.end(), rng);
  SymbolizationConfig config;
  config.subsample_size = 60;
  const SubjectDayId id{"S1", 4, ClassLabel::PreTx};
  const auto result = symbolize_day(pulses, id, config, 99);
  CHECK(result.k == 3);
  CHECK(result.subsample_size == 60);
  result.vector.validate();
  std::vector<double> freqs;
  for (const auto& s : result.vector.symbols) freqs.push_back(s.frequency);
  std::sort(freqs.begin(), freqs.end());
  CHECK(freqs == std::vector<double>{0.2, 0.3, 0.5});
  const auto again = symbolize_day(pulses, id, config, 99);
  CHECK(format_symbol_vectors(std::vector{again.vector}) == format_symbol_vectors(std::vector{result.vector}));
}

TEST_CASE("symbol vectors validate and drop empty symbols") {
  const std::vector<std::size_t> counts = {3, 0, 1};
  const auto v = make_symbol_vector({"S", 0, ClassLabel::Control}, {{1.0, 2.0}, {0.0, 0.0}, {3.0, 4.0}}, counts);
  REQUIRE(v.k() == 2);
  CHECK(v.symbols[0].frequency == 0.75);
  CHECK(v.symbols[1].count == 1);
  v.validate();
  auto bad = v;
  bad.symbols[0].frequency = 0.5;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = v;
  bad.symbols[1].centroid.push_back(0.0);
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("symbol vector text round-trips bit for bit") {
  std::mt19937_64 rng(23);
  std::vector<SymbolVector> vectors;
  for (int i = 0; i < 4; ++i) {
    std::vector<Series> centroids;
    std::vector<std::size_t> counts;
    for (int k = 0; k <= i; ++k) {
      centroids.push_back(testsupport::random_series(rng, 11, -1e3, 1e3));
      counts.push_back(static_cast<std::size_t>(k * 7 + 3));
    }
    vectors.push_back(make_symbol_vector({"P0" + std::to_string(i), i * 2, ClassLabel::PostTx}, centroids, counts));
  }
  vectors[0].symbols[0].centroid[0] = 1e-300;
  TempDir dir("symbols");
  write_symbol_vectors(dir / "s.txt", vectors);
  const auto back = read_symbol_vectors(dir / "s.txt");
  REQUIRE(back.size() == vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    CHECK(back[i].id == vectors[i].id);
    REQUIRE(back[i].k() == vectors[i].k());
    for (std::size_t k = 0; k < back[i].k(); ++k) {
      CHECK(back[i].symbols[k].centroid == vectors[i].symbols[k].centroid);
      CHECK(back[i].symbols[k].frequency == vectors[i].symbols[k].frequency);
      CHECK(back[i].symbols[k].count == vectors[i].symbols[k].count);
    }
  }
  auto text = format_symbol_vectors(vectors);
  text.erase(text.rfind("[end]"));
  CHECK_THROWS_AS(parse_symbol_vectors(text), DataError);
}
