#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vocalsym/baselines.hpp"
#include "vocalsym/evaluation.hpp"
#include "vocalsym/segmentation.hpp"
#include "vocalsym/symbolization.hpp"

namespace vocalsym {

inline constexpr std::string_view kVersion = "0.1.0";

struct EvaluationSettings {
  std::size_t n = 18;
  std::size_t trials = 5000;
  bool sweep = true;
  std::size_t sweep_min = 2;
  std::size_t sweep_max = 40;
  std::vector<std::string> comparisons = {"PreTx/Con", "PostTx/Con"};
  bool intra_subject = true;
  std::size_t intra_n = 3;
  std::size_t intra_sweep_min = 2;
  std::size_t intra_sweep_max = 10;
  NormalizationMode intra_normalization = NormalizationMode::DbSplScaled;
};

struct BaselineSettings {
  bool enabled = false;
  BaselineConfig features;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  SegmentationConfig segmentation;
  SymbolizationConfig symbolization;
  EvaluationSettings evaluation;
  BaselineSettings baselines;

  /// Throws DataError naming the offending field.
  void validate() const;
};

/// JSON object; absent keys keep their defaults, unknown keys are rejected.
PipelineConfig parse_pipeline_config(std::string_view text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
/// Every field, including defaults (stable key order).
std::string pipeline_config_json(const PipelineConfig& config);

std::vector<Comparison> resolve_comparisons(const std::vector<std::string>& names);

struct RunOptions {
  unsigned workers = 1;
  std::optional<std::filesystem::path> stage_cache;  // default: <out>/cache
};

struct StageStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
};

struct RunSummary {
  StageStats segmentation;
  StageStats symbolization;
  StageStats mismatch;
  std::vector<std::string> written;
};

/// Hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// Content-addressed stage runner shared by run_pipeline and the CLI.
class StageCache {
 public:
  explicit StageCache(std::filesystem::path root);
  std::filesystem::path path_for(std::string_view stage, std::string_view key, std::string_view ext) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

/// Key of one recording's segmentation: file bytes, entry metadata and config.
std::string segmentation_key(const std::string& file_bytes, const ManifestEntry& entry,
                             const SegmentationConfig& config);

/// Ingest -> segment -> symbolize -> mismatch -> evaluate, writing reports
/// under `out_dir`. Stage results are cached by content hash.
RunSummary run_pipeline(const PipelineConfig& config, const CohortManifest& manifest,
                        const std::filesystem::path& out_dir, const RunOptions& options = {});

/// Symbol vectors of every manifest entry using `mode` normalization (cached).
std::vector<SymbolVector> symbolize_cohort(const PipelineConfig& config, const CohortManifest& manifest,
                                           NormalizationMode mode, StageCache& cache, unsigned workers,
                                           RunSummary& summary);

}  // namespace vocalsym
