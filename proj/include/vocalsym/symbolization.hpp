#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vocalsym/common.hpp"
#include "vocalsym/distance.hpp"
#include "vocalsym/pulse_segment.hpp"

namespace vocalsym {

struct Symbol {
  Series centroid;
  double frequency = 0.0;
  std::size_t count = 0;
};

/// A subject-day summarized as (centroid, frequency) pairs.
struct SymbolVector {
  SubjectDayId id;
  std::vector<Symbol> symbols;

  std::size_t k() const { return symbols.size(); }
  std::size_t centroid_length() const { return symbols.empty() ? 0 : symbols.front().centroid.size(); }
  /// Throws DataError unless k >= 1, lengths agree and frequencies sum to 1.
  void validate() const;
};

/// Builds a SymbolVector from centroids and member counts (f_i = n_i / sum n).
SymbolVector make_symbol_vector(SubjectDayId id, std::vector<Series> centroids,
                                std::span<const std::size_t> counts);

struct Merge {
  std::size_t left = 0;   // node ids: leaves 0..n-1, merge t creates node n+t
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::size_t leaf_count = 0;
  std::vector<Merge> merges;

  double max_height() const;
};

/// Agglomerative Ward clustering via the Lance-Williams recursion on squared
/// dissimilarities (heights reported as square roots). Ties go to the lowest
/// (slot, slot) pair, where a merged cluster keeps the lower slot.
Dendrogram ward_cluster(const CondensedMatrix& distances);

struct DendrogramCut {
  std::size_t k = 0;
  /// Per-leaf cluster index, numbered by first appearance in leaf order.
  std::vector<std::size_t> labels;
};

/// Undo every merge higher than fraction * max height.
DendrogramCut cut_dendrogram(const Dendrogram& dendrogram, double fraction);
/// Keep exactly `clusters` groups by applying the first leaf_count - clusters merges.
DendrogramCut cut_to_clusters(const Dendrogram& dendrogram, std::size_t clusters);

/// Sorted indices of a uniform sample without replacement of min(n_sub, count).
std::vector<std::size_t> subsample_indices(std::size_t count, std::size_t n_sub, std::uint64_t seed);
std::vector<PulseSegment> subsample_pulses(std::span<const PulseSegment> pulses, std::size_t n_sub,
                                           std::uint64_t seed);

enum class AssignmentDistance { LbKeogh, Euclidean };

struct KMeansConfig {
  std::size_t max_iter = 100;
  AssignmentDistance distance = AssignmentDistance::LbKeogh;
  double band_fraction = 0.1;
  unsigned workers = 1;
};

struct KMeansResult {
  std::vector<Series> centroids;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> assignment;
  /// Sum of squared pulse-to-centroid distances after each accepted step.
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  bool converged = false;
  /// Stopped because a centroid update raised the objective (possible with
  /// LB_Keogh, where the pointwise mean is not the minimizer); that update
  /// was discarded.
  bool stopped_on_increase = false;
  std::size_t reseeded = 0;
};

/// Pointwise means of the members of each label (labels in [0, k)).
std::vector<Series> centroids_from_labels(std::span<const Series> pulses,
                                          std::span<const std::size_t> members,
                                          std::span<const std::size_t> labels, std::size_t k);

/// Lloyd iterations from the given centroids until no assignment changes
/// (or max_iter). Empty clusters are reseeded with the pulse farthest from
/// its centroid.
KMeansResult kmeans(std::span<const Series> pulses, std::vector<Series> initial_centroids,
                    const KMeansConfig& config);

struct SymbolizationConfig {
  std::size_t subsample_size = 3000;
  double cut_fraction = 0.30;
  KMeansConfig kmeans;
};

struct SymbolizationResult {
  SymbolVector vector;
  std::size_t subsample_size = 0;
  std::size_t k = 0;
  KMeansResult kmeans;
};

/// Subsample -> Ward -> cut at fraction of max height -> k-means over all pulses.
SymbolizationResult symbolize_day(std::span<const PulseSegment> pulses, const SubjectDayId& id,
                                  const SymbolizationConfig& config, std::uint64_t seed);

/// Text records; numbers use shortest round-trip formatting so reading
/// back reproduces every bit.
std::string format_symbol_vectors(std::span<const SymbolVector> vectors);
std::vector<SymbolVector> parse_symbol_vectors(std::string_view text);
void write_symbol_vectors(const std::filesystem::path& path, std::span<const SymbolVector> vectors);
std::vector<SymbolVector> read_symbol_vectors(const std::filesystem::path& path);

}  // namespace vocalsym
