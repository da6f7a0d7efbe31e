#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vocalsym/common.hpp"
#include "vocalsym/pulse_segment.hpp"

namespace vocalsym {

/// (signal-unit RMS, dbSPL) reading from a reference meter.
struct CalibrationPair {
  double rms = 0.0;
  double db_spl = 0.0;
};

/// dB = intercept + slope * log10(rms). `identity` marks the fallback used
/// when no calibration pairs exist (levels are then dB re 1 signal unit).
struct LevelCalibration {
  double slope = 20.0;
  double intercept = 0.0;
  bool identity = true;
  bool applied = false;
};

struct RawRecording {
  Series samples;
  double sample_rate_hz = 0.0;
  std::string subject_id;
  std::int64_t day_index = 0;
  ClassLabel class_label = ClassLabel::Unlabeled;
  LevelCalibration calibration;

  SubjectDayId id() const { return {subject_id, day_index, class_label}; }
};

struct ManifestEntry {
  std::filesystem::path path;
  std::string subject_id;
  std::int64_t day_index = 0;
  ClassLabel class_label = ClassLabel::Unlabeled;
  std::optional<double> sample_rate_hz;
  std::vector<CalibrationPair> calibration;

  SubjectDayId id() const { return {subject_id, day_index, class_label}; }
};

struct CohortManifest {
  std::vector<ManifestEntry> entries;
};

/// Reads a JSON manifest; relative paths resolve against the manifest's
/// directory. Validates labels, id uniqueness, and that every file exists.
CohortManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const CohortManifest& manifest, const std::filesystem::path& path);

/// 16-bit PCM mono WAV or one-real-per-line CSV (rate from the entry).
RawRecording load_recording(const std::filesystem::path& path, const ManifestEntry& entry);

/// int16 little-endian mono; samples are clamped to [-1, 1) before quantizing.
void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               std::uint32_t sample_rate_hz);
void write_csv_signal(const std::filesystem::path& path, std::span<const double> samples);

struct Region {
  std::size_t start_sample = 0;  // inclusive
  std::size_t end_sample = 0;    // exclusive
  double mean_level_db = 0.0;

  std::size_t length() const { return end_sample - start_sample; }
};
using VoicedRegion = Region;

/// Silent runs binned by duration: [1 s, 1 min), [1 min, 10 min),
/// [10 min, 1 h), [1 h, inf). Runs under 1 s are only counted in `sub_second`.
struct SilenceProfile {
  std::array<std::size_t, 4> bin_counts{};
  std::size_t sub_second = 0;
};

struct VoicingConfig {
  double frame_ms = 50.0;
  double level_threshold_db = -30.0;
  /// Threshold is measured relative to the loudest frame instead of absolute.
  bool relative_threshold = false;
};

struct VoicingResult {
  std::vector<VoicedRegion> voiced;
  std::vector<Region> silent;
  SilenceProfile silence;
};

double rms(std::span<const double> x);
/// 20*log10(rms); -inf for an all-zero frame.
double level_db(std::span<const double> x);

VoicingResult detect_voicing(const RawRecording& rec, const VoicingConfig& config);

LevelCalibration fit_calibration(std::span<const CalibrationPair> pairs);

/// The pointwise dbSPL map for one sample (identity calibrations pass through).
double calibrate_sample(const LevelCalibration& cal, double x);
/// Maps every sample magnitude through the fitted log-linear level map
/// (sign preserved), so a constant-magnitude frame at RMS r ends up at
/// intercept + slope*log10(r) dB. With no pairs the identity map is flagged.
RawRecording scale_to_dbspl(const RawRecording& rec, std::span<const CalibrationPair> pairs);
/// Inverse of scale_to_dbspl using the calibration recorded on `rec`.
RawRecording unscale_from_dbspl(const RawRecording& rec);

enum class NormalizationMode { ZScore, DbSplScaled };

std::string_view to_string(NormalizationMode mode);
NormalizationMode parse_normalization_mode(std::string_view text);

struct NormalizedSegments {
  std::vector<PulseSegment> segments;
  std::size_t dropped = 0;
};

/// ZScore: population mean 0 / variance 1 per segment; constant segments
/// are dropped and counted. DbSplScaled: returned unchanged.
NormalizedSegments normalize_segments(std::vector<PulseSegment> segments, NormalizationMode mode);

}  // namespace vocalsym
