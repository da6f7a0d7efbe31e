#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vocalsym/evaluation.hpp"
#include "vocalsym/ingest.hpp"

namespace vocalsym {

inline constexpr std::size_t kStatisticCount = 11;
inline constexpr std::size_t kFeatureCount = 2 * kStatisticCount;

/// Statistic order within each measure block (f0 block first, then SPL).
const std::vector<std::string>& statistic_names();
/// "f0_mean", ..., "spl_frame_count".
const std::vector<std::string>& feature_names();

struct FeatureVector {
  SubjectDayId id;
  std::optional<std::size_t> window;  // absent for per-day means
  Series values;                      // kFeatureCount entries
};

struct BaselineConfig {
  double window_seconds = 300.0;
  double frame_ms = 50.0;
  double level_threshold_db = -30.0;
  double min_pitch_hz = 70.0;
  double max_pitch_hz = 1000.0;
  unsigned workers = 1;
};

/// The 11 statistics over one measure; `frames` is the window's total frame
/// count used for the voiced fraction.
Series measure_statistics(std::span<const double> values, std::size_t frames);

/// Per window: f0 over frames above the level threshold with a confident
/// pitch, SPL over frames above the level threshold. Windows without such
/// frames are dropped; a trailing partial window is kept when it spans at
/// least half a window.
std::vector<FeatureVector> compute_vaf(const RawRecording& rec, const BaselineConfig& config = {});

/// Feature-wise mean over the windows of one subject-day.
FeatureVector compute_maf(std::span<const FeatureVector> windows);

/// Indices kept after dropping the later member of any feature pair with
/// |Pearson r| > threshold (constant features never correlate).
std::vector<std::size_t> prune_correlated(std::span<const FeatureVector> vectors, double threshold = 0.95);

/// Column-wise z-scores (population sd; constant columns become 0).
std::vector<Series> standardize(std::span<const FeatureVector> vectors);

struct VafClustering {
  std::vector<std::size_t> window_clusters;
  /// Subject-day majority over its windows; ties go to the lower cluster.
  ClusterAssignment days;
};

/// k-means (squared Euclidean, k-means++ seeding) over standardized windows.
VafClustering cluster_vaf(std::span<const FeatureVector> vectors, std::size_t n, std::uint64_t seed,
                          std::size_t max_iter = 300);

/// Ward over Euclidean distances of standardized per-day means.
ClusterAssignment cluster_maf(std::span<const FeatureVector> vectors, std::size_t n);

std::string feature_csv(std::span<const FeatureVector> vectors);

}  // namespace vocalsym
