#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "vocalsym/ingest.hpp"
#include "vocalsym/pulse_segment.hpp"

namespace vocalsym {

/// Lag search range for pitch estimation, in samples.
struct PitchRange {
  double min_period = 0.0;
  double max_period = 0.0;

  static PitchRange from_hz(double sample_rate_hz, double min_hz, double max_hz);
};

struct PitchEstimate {
  double period_samples = 0.0;
  PitchRange valid_range;
  /// Normalized autocorrelation at the chosen lag.
  double confidence = 0.0;

  static constexpr double kLowConfidence = 0.3;
  bool low_confidence() const { return confidence < kLowConfidence; }
};

/// Strict local maxima with topographic prominence >= min_prominence, then
/// greedy highest-first suppression of neighbours closer than min_distance
/// (equal heights: lower index wins). Sorted ascending.
std::vector<std::size_t> detect_peaks(std::span<const double> region, double min_prominence,
                                      std::size_t min_distance);

/// Prominence of each given peak index (same definition detect_peaks filters on).
std::vector<double> peak_prominences(std::span<const double> region,
                                     std::span<const std::size_t> peaks);

/// Mean-removed normalized autocorrelation over the lag range; picks the
/// first local maximum within 10% of the best score (so multiples of the
/// period do not win on noise) and refines it by parabolic interpolation. Throws DataError when the region is
/// shorter than two maximum periods.
PitchEstimate estimate_pitch(std::span<const double> region, PitchRange range);

/// Removes peaks closer than (1-tol)*period to the previous kept peak, then
/// fills gaps wider than (1+tol)*period with peaks at local maxima of
/// period-sized windows. Output gaps lie in [(1-tol)P, 2(1+tol)P].
std::vector<std::size_t> correct_peaks(std::span<const double> region,
                                       std::span<const std::size_t> peaks,
                                       const PitchEstimate& pitch, double tolerance);

/// Half-open [peak_i, peak_{i+1}) segments; `offset` converts region indices
/// to recording sample indices.
std::vector<PulseSegment> segment_pulses(std::span<const double> region,
                                         std::span<const std::size_t> peaks,
                                         const std::string& subject_id, std::int64_t day_index,
                                         std::size_t offset = 0);

/// Linear interpolation onto `target` evenly spaced points spanning both endpoints.
Series resample_linear(std::span<const double> x, std::size_t target);

/// Resamples every segment to `target` (or the longest raw length when
/// unset, optionally capped).
std::vector<PulseSegment> length_normalize(std::vector<PulseSegment> segments,
                                           std::optional<std::size_t> target = std::nullopt,
                                           std::optional<std::size_t> cap = std::nullopt);

enum class PitchScope { PerRegion, PerDay };

struct SegmentationConfig {
  VoicingConfig voicing;
  double min_pitch_hz = 70.0;
  double max_pitch_hz = 1000.0;
  PitchScope pitch_scope = PitchScope::PerRegion;
  double correction_tolerance = 0.3;
  /// Prominence floor = max(absolute, relative * region peak-to-peak range).
  double min_prominence = 0.0;
  double min_prominence_relative = 0.25;
  std::optional<std::size_t> target_length;
  std::optional<std::size_t> max_target_length;
  NormalizationMode normalization = NormalizationMode::ZScore;
};

struct SegmentationResult {
  std::vector<PulseSegment> segments;
  VoicingResult voicing;
  std::size_t dropped_constant = 0;
  std::size_t regions_without_pitch = 0;
};

/// Voicing -> pitch -> peaks -> correction -> pulses -> length and amplitude
/// normalization for one recording. Regions are concatenated in time order.
SegmentationResult segment_recording(const RawRecording& rec, const SegmentationConfig& config);

/// Binary columnar dump: header, values matrix, then per-row sources.
void write_segment_dump(const std::filesystem::path& path, std::span<const PulseSegment> segments);
std::vector<PulseSegment> read_segment_dump(const std::filesystem::path& path);
/// One CSV row per segment plus `<path>.index.csv` with subject,day,start,raw_length.
void write_segment_csv(const std::filesystem::path& path, std::span<const PulseSegment> segments);
std::vector<PulseSegment> read_segment_csv(const std::filesystem::path& path);

}  // namespace vocalsym
