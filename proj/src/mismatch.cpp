#include "vocalsym/mismatch.hpp"

#include "vocalsym/parallel.hpp"
#include "vocalsym/segmentation.hpp"

namespace vocalsym {

double symbol_distance(std::span<const double> a, std::span<const double> b, double band_fraction) {
  if (a.empty() || b.empty()) throw std::invalid_argument("empty centroid");
  if (a.size() == b.size()) return symmetric_lb_keogh(a, b, band_radius_for(a.size(), band_fraction));
  const std::size_t length = std::max(a.size(), b.size());
  const Series ra = a.size() == length ? Series(a.begin(), a.end()) : resample_linear(a, length);
  const Series rb = b.size() == length ? Series(b.begin(), b.end()) : resample_linear(b, length);
  return symmetric_lb_keogh(ra, rb, band_radius_for(length, band_fraction));
}

double symbolic_mismatch(const SymbolVector& a, const SymbolVector& b, double band_fraction) {
  if (a.symbols.empty() || b.symbols.empty()) throw DataError("symbolic mismatch of an empty symbol vector");
  double w = 0.0;
  for (const auto& sa : a.symbols) {
    for (const auto& sb : b.symbols) {
      w += sa.frequency * sb.frequency * symbol_distance(sa.centroid, sb.centroid, band_fraction);
    }
  }
  return w;
}

DistanceMatrix mismatch_matrix(std::span<const SymbolVector> vectors, const MismatchConfig& config) {
  if (vectors.size() < 2) throw DataError("mismatch matrix needs at least two symbol vectors");
  const std::size_t q = vectors.size();
  DistanceMatrix dm;
  dm.kind = MatrixKind::Mismatch;
  for (const auto& v : vectors) dm.ids.push_back(v.id);
  dm.values.assign(q * q, 0.0);
  parallel_for(q - 1, config.workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < q; ++j) {
      dm.at(i, j) = symbolic_mismatch(vectors[i], vectors[j], config.band_fraction);
    }
  });
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = i + 1; j < q; ++j) dm.at(j, i) = dm(i, j);
  }
  return dm;
}

}  // namespace vocalsym
