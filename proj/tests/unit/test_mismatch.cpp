#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "vocalsym/mismatch.hpp"

using namespace vocalsym;

namespace {

SymbolVector vec(const std::string& subject, std::vector<Series> centroids, std::vector<std::size_t> counts) {
  return make_symbol_vector({subject, 0, ClassLabel::Control}, std::move(centroids), counts);
}

Series interp(const Series& x, std::size_t m) {
  Series out(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double pos = static_cast<double>(j) * static_cast<double>(x.size() - 1) / static_cast<double>(m - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    out[j] = i + 1 < x.size() ? x[i] + (pos - static_cast<double>(i)) * (x[i + 1] - x[i]) : x.back();
  }
  return out;
}

double mismatch_naive(const SymbolVector& a, const SymbolVector& b) {
  double total = 0.0;
  for (const auto& sa : a.symbols) {
    for (const auto& sb : b.symbols) {
      const std::size_t m = std::max(sa.centroid.size(), sb.centroid.size());
      const auto ca = sa.centroid.size() == m ? sa.centroid : interp(sa.centroid, m);
      const auto cb = sb.centroid.size() == m ? sb.centroid : interp(sb.centroid, m);
      const auto r = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(m)));
      total += sa.frequency * sb.frequency * testsupport::symmetric_lb_naive(ca, cb, r);
    }
  }
  return total;
}

}  // namespace

TEST_CASE("half-shared alphabet gives half the symbol distance") {
  const Series s1(10, 0.0);
  const Series s2(10, 1.0);  // distance sqrt(10)
  const auto a = vec("A", {s1, s2}, {5, 5});
  const auto b = vec("B", {s1}, {9});
  CHECK(symbol_distance(s1, s2) == doctest::Approx(std::sqrt(10.0)));
  CHECK(symbolic_mismatch(a, b) == doctest::Approx(0.5 * std::sqrt(10.0)));
  CHECK(symbolic_mismatch(b, a) == symbolic_mismatch(a, b));
  // Self-mismatch of a two-symbol vector: 2 * 0.25 * d.
  CHECK(symbolic_mismatch(a, a) == doctest::Approx(0.5 * std::sqrt(10.0)));
  CHECK(symbolic_mismatch(b, b) == 0.0);
}

TEST_CASE("mismatch matches a brute-force double sum") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> k_pick(1, 5), len_pick(8, 30), count_pick(1, 50);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SymbolVector> vs;
    for (int side = 0; side < 2; ++side) {
      const auto k = k_pick(rng);
      const auto len = len_pick(rng);
      std::vector<Series> cs;
      std::vector<std::size_t> counts;
      for (std::size_t i = 0; i < k; ++i) {
        cs.push_back(testsupport::random_series(rng, len));
        counts.push_back(count_pick(rng));
      }
      vs.push_back(vec(side ? "B" : "A", cs, counts));
    }
    CHECK(symbolic_mismatch(vs[0], vs[1]) == doctest::Approx(mismatch_naive(vs[0], vs[1])).epsilon(1e-12));
  }
}

TEST_CASE("mismatch matrix is symmetric, zero-diagonal and worker independent") {
  std::mt19937_64 rng(33);
  std::vector<SymbolVector> vs;
  for (int i = 0; i < 9; ++i) {
    std::vector<Series> cs = {testsupport::random_series(rng, 20), testsupport::random_series(rng, 20)};
    vs.push_back(make_symbol_vector({"S" + std::to_string(i), i, ClassLabel::PreTx}, cs, std::vector<std::size_t>{2, 3}));
  }
  const auto one = mismatch_matrix(vs, {0.1, 1});
  const auto four = mismatch_matrix(vs, {0.1, 4});
  CHECK(one.values == four.values);
  one.validate();
  CHECK(one.kind == MatrixKind::Mismatch);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    CHECK(one(i, i) == 0.0);
    CHECK(one.ids[i] == vs[i].id);
    for (std::size_t j = 0; j < vs.size(); ++j) {
      if (i != j) CHECK(one(i, j) == symbolic_mismatch(vs[std::min(i, j)], vs[std::max(i, j)]));
    }
  }
  CHECK_THROWS_AS(mismatch_matrix(std::span(vs).first(1)), DataError);
  SymbolVector empty;
  CHECK_THROWS_AS(symbolic_mismatch(empty, vs[0]), DataError);
}
