#pragma once

#include <span>

#include "vocalsym/distance_matrix.hpp"
#include "vocalsym/symbolization.hpp"

namespace vocalsym {

struct MismatchConfig {
  double band_fraction = 0.1;
  unsigned workers = 1;
};

/// Symmetrized LB_Keogh between two centroids. A shorter centroid is
/// linearly resampled to the longer length first; the band radius follows
/// the common length.
double symbol_distance(std::span<const double> a, std::span<const double> b, double band_fraction = 0.1);

/// Sum over symbol pairs of f_a * f_b * symbol_distance(s_a, s_b). Not zero
/// for a multi-symbol vector compared with itself.
double symbolic_mismatch(const SymbolVector& a, const SymbolVector& b, double band_fraction = 0.1);

/// All pairs, diagonal fixed at 0.
DistanceMatrix mismatch_matrix(std::span<const SymbolVector> vectors, const MismatchConfig& config = {});

}  // namespace vocalsym
