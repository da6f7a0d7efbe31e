#include "vocalsym/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <set>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "vocalsym/io.hpp"
#include "vocalsym/mismatch.hpp"
#include "vocalsym/parallel.hpp"

namespace vocalsym {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

namespace {

/// Tracks which keys of a JSON object were read so leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw DataError("config: " + name_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw DataError("config: " + where(key) + " has the wrong type");
    }
  }

  template <typename T>
  void read_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    read(key, v);
    out = v;
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), prefix() + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw DataError("config: unknown key " + where(key.c_str()));
    }
  }

  std::string where(const char* key) const { return prefix() + key; }

 private:
  std::string prefix() const { return name_.empty() ? "" : name_ + "."; }
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw DataError("config: " + message);
}

ordered_json optional_json(const std::optional<std::size_t>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json segmentation_json(const SegmentationConfig& s) {
  ordered_json j;
  j["frame_ms"] = s.voicing.frame_ms;
  j["level_threshold_db"] = s.voicing.level_threshold_db;
  j["relative_threshold"] = s.voicing.relative_threshold;
  j["min_pitch_hz"] = s.min_pitch_hz;
  j["max_pitch_hz"] = s.max_pitch_hz;
  j["pitch_scope"] = s.pitch_scope == PitchScope::PerDay ? "day" : "region";
  j["correction_tolerance"] = s.correction_tolerance;
  j["min_prominence"] = s.min_prominence;
  j["min_prominence_relative"] = s.min_prominence_relative;
  j["target_length"] = optional_json(s.target_length);
  j["max_target_length"] = optional_json(s.max_target_length);
  j["normalization"] = std::string(to_string(s.normalization));
  return j;
}

ordered_json symbolization_json(const SymbolizationConfig& s) {
  ordered_json j;
  j["subsample_size"] = s.subsample_size;
  j["cut_fraction"] = s.cut_fraction;
  j["band_fraction"] = s.kmeans.band_fraction;
  j["max_iter"] = s.kmeans.max_iter;
  j["assignment"] = s.kmeans.distance == AssignmentDistance::Euclidean ? "euclidean" : "lb_keogh";
  return j;
}

ordered_json evaluation_json(const EvaluationSettings& e) {
  ordered_json j;
  j["n"] = e.n;
  j["trials"] = e.trials;
  j["sweep"] = e.sweep;
  j["sweep_min"] = e.sweep_min;
  j["sweep_max"] = e.sweep_max;
  j["comparisons"] = e.comparisons;
  j["intra_subject"] = e.intra_subject;
  j["intra_n"] = e.intra_n;
  j["intra_sweep_min"] = e.intra_sweep_min;
  j["intra_sweep_max"] = e.intra_sweep_max;
  j["intra_normalization"] = std::string(to_string(e.intra_normalization));
  return j;
}

ordered_json baselines_json(const BaselineSettings& b) {
  ordered_json j;
  j["enabled"] = b.enabled;
  j["window_seconds"] = b.features.window_seconds;
  j["frame_ms"] = b.features.frame_ms;
  j["level_threshold_db"] = b.features.level_threshold_db;
  j["min_pitch_hz"] = b.features.min_pitch_hz;
  j["max_pitch_hz"] = b.features.max_pitch_hz;
  return j;
}

}  // namespace

void PipelineConfig::validate() const {
  const auto& s = segmentation;
  require(s.voicing.frame_ms > 0.0, "segmentation.frame_ms must be positive");
  require(std::isfinite(s.voicing.level_threshold_db), "segmentation.level_threshold_db must be finite");
  require(s.min_pitch_hz > 0.0 && s.max_pitch_hz > s.min_pitch_hz,
          "segmentation pitch range needs 0 < min_pitch_hz < max_pitch_hz");
  require(s.correction_tolerance > 0.0 && s.correction_tolerance < 1.0,
          "segmentation.correction_tolerance must lie in (0, 1)");
  require(s.min_prominence >= 0.0, "segmentation.min_prominence must be nonnegative");
  require(s.min_prominence_relative >= 0.0 && s.min_prominence_relative <= 1.0,
          "segmentation.min_prominence_relative must lie in [0, 1]");
  require(!s.target_length || *s.target_length >= 2, "segmentation.target_length must be at least 2");
  require(!s.max_target_length || *s.max_target_length >= 2, "segmentation.max_target_length must be at least 2");
  const auto& y = symbolization;
  require(y.subsample_size >= 1, "symbolization.subsample_size must be positive");
  require(y.cut_fraction > 0.0 && y.cut_fraction <= 1.0, "symbolization.cut_fraction must lie in (0, 1]");
  require(y.kmeans.band_fraction >= 0.0 && y.kmeans.band_fraction <= 1.0,
          "symbolization.band_fraction must lie in [0, 1]");
  require(y.kmeans.max_iter >= 1, "symbolization.max_iter must be positive");
  const auto& e = evaluation;
  require(e.n >= 1, "evaluation.n must be positive");
  require(e.trials >= 1, "evaluation.trials must be positive");
  require(e.sweep_min >= 1 && e.sweep_min <= e.sweep_max, "evaluation sweep range needs 1 <= sweep_min <= sweep_max");
  require(e.intra_n >= 1, "evaluation.intra_n must be positive");
  require(e.intra_sweep_min >= 1 && e.intra_sweep_min <= e.intra_sweep_max,
          "evaluation intra sweep range needs 1 <= intra_sweep_min <= intra_sweep_max");
  require(!e.comparisons.empty(), "evaluation.comparisons must not be empty");
  resolve_comparisons(e.comparisons);
  const auto& b = baselines.features;
  require(b.window_seconds > 0.0 && b.frame_ms > 0.0, "baselines window and frame lengths must be positive");
  require(b.min_pitch_hz > 0.0 && b.max_pitch_hz > b.min_pitch_hz, "baselines pitch range is invalid");
}

std::vector<Comparison> resolve_comparisons(const std::vector<std::string>& names) {
  std::vector<Comparison> out;
  for (const auto& name : names) {
    const auto slash = name.find('/');
    if (slash == std::string::npos) throw DataError("config: comparison '" + name + "' must look like A/B");
    const auto a = parse_class_label(name.substr(0, slash));
    const auto b = parse_class_label(name.substr(slash + 1));
    if (a == b || a == ClassLabel::Unlabeled || b == ClassLabel::Unlabeled) {
      throw DataError("config: comparison '" + name + "' needs two distinct class labels");
    }
    out.push_back({name, {a, b}});
  }
  return out;
}

PipelineConfig parse_pipeline_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("config: invalid JSON: ") + e.what());
  }
  PipelineConfig c;
  Section root(j, "");
  root.read("seed", c.seed);
  if (auto s = root.child("segmentation")) {
    auto& g = c.segmentation;
    s->read("frame_ms", g.voicing.frame_ms);
    s->read("level_threshold_db", g.voicing.level_threshold_db);
    s->read("relative_threshold", g.voicing.relative_threshold);
    s->read("min_pitch_hz", g.min_pitch_hz);
    s->read("max_pitch_hz", g.max_pitch_hz);
    std::string scope = g.pitch_scope == PitchScope::PerDay ? "day" : "region";
    s->read("pitch_scope", scope);
    if (scope == "day") g.pitch_scope = PitchScope::PerDay;
    else if (scope == "region") g.pitch_scope = PitchScope::PerRegion;
    else throw DataError("config: segmentation.pitch_scope must be 'region' or 'day'");
    s->read("correction_tolerance", g.correction_tolerance);
    s->read("min_prominence", g.min_prominence);
    s->read("min_prominence_relative", g.min_prominence_relative);
    s->read_optional("target_length", g.target_length);
    s->read_optional("max_target_length", g.max_target_length);
    std::string mode(to_string(g.normalization));
    s->read("normalization", mode);
    g.normalization = parse_normalization_mode(mode);
    s->finish();
  }
  if (auto s = root.child("symbolization")) {
    auto& y = c.symbolization;
    s->read("subsample_size", y.subsample_size);
    s->read("cut_fraction", y.cut_fraction);
    s->read("band_fraction", y.kmeans.band_fraction);
    s->read("max_iter", y.kmeans.max_iter);
    std::string assignment = "lb_keogh";
    s->read("assignment", assignment);
    if (assignment == "lb_keogh") y.kmeans.distance = AssignmentDistance::LbKeogh;
    else if (assignment == "euclidean") y.kmeans.distance = AssignmentDistance::Euclidean;
    else throw DataError("config: symbolization.assignment must be 'lb_keogh' or 'euclidean'");
    s->finish();
  }
  if (auto s = root.child("evaluation")) {
    auto& e = c.evaluation;
    s->read("n", e.n);
    s->read("trials", e.trials);
    s->read("sweep", e.sweep);
    s->read("sweep_min", e.sweep_min);
    s->read("sweep_max", e.sweep_max);
    s->read("comparisons", e.comparisons);
    s->read("intra_subject", e.intra_subject);
    s->read("intra_n", e.intra_n);
    s->read("intra_sweep_min", e.intra_sweep_min);
    s->read("intra_sweep_max", e.intra_sweep_max);
    std::string mode(to_string(e.intra_normalization));
    s->read("intra_normalization", mode);
    e.intra_normalization = parse_normalization_mode(mode);
    s->finish();
  }
  if (auto s = root.child("baselines")) {
    auto& b = c.baselines;
    s->read("enabled", b.enabled);
    s->read("window_seconds", b.features.window_seconds);
    s->read("frame_ms", b.features.frame_ms);
    s->read("level_threshold_db", b.features.level_threshold_db);
    s->read("min_pitch_hz", b.features.min_pitch_hz);
    s->read("max_pitch_hz", b.features.max_pitch_hz);
    s->finish();
  }
  root.finish();
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) { return parse_pipeline_config(io::read_text_file(path)); }

std::string pipeline_config_json(const PipelineConfig& config) {
  ordered_json j;
  j["seed"] = config.seed;
  j["segmentation"] = segmentation_json(config.segmentation);
  j["symbolization"] = symbolization_json(config.symbolization);
  j["evaluation"] = evaluation_json(config.evaluation);
  j["baselines"] = baselines_json(config.baselines);
  return j.dump(2) + "\n";
}

StageCache::StageCache(fs::path root) : root_(std::move(root)) {}

fs::path StageCache::path_for(std::string_view stage, std::string_view key, std::string_view ext) const {
  return root_ / stage / (std::string(key) + std::string(ext));
}

std::string segmentation_key(const std::string& file_bytes, const ManifestEntry& entry,
                             const SegmentationConfig& config) {
  ordered_json meta;
  meta["stage"] = "segment";
  meta["version"] = kVersion;
  meta["file"] = sha256_hex(file_bytes);
  meta["id"] = entry.id().token();
  meta["sample_rate_hz"] = entry.sample_rate_hz ? json(*entry.sample_rate_hz) : json(nullptr);
  meta["extension"] = entry.path.extension().string();
  json cal = json::array();
  for (const auto& p : entry.calibration) cal.push_back({p.rms, p.db_spl});
  meta["calibration"] = cal;
  meta["config"] = segmentation_json(config);
  return sha256_hex(meta.dump());
}

namespace {

/// Write to a temporary name then rename, so an interrupted run never leaves
/// a truncated cache entry behind.
template <typename Writer>
void write_atomically(const fs::path& path, Writer&& writer) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  writer(tmp);
  fs::rename(tmp, path);
}

std::string slug(std::string_view comparison) {
  std::string out;
  for (char c : comparison) out += c == '/' ? std::string("_vs_") : std::string(1, c);
  return out;
}

struct DayJob {
  SymbolVector vector;
  std::string key;
  bool seg_hit = false;
  bool sym_hit = false;
};

}  // namespace

std::vector<SymbolVector> symbolize_cohort(const PipelineConfig& config, const CohortManifest& manifest,
                                           NormalizationMode mode, StageCache& cache, unsigned workers,
                                           RunSummary& summary) {
  auto seg_config = config.segmentation;
  seg_config.normalization = mode;
  auto sym_config = config.symbolization;
  sym_config.kmeans.workers = 1;
  const std::string sym_meta = symbolization_json(config.symbolization).dump();

  std::vector<DayJob> jobs(manifest.entries.size());
  parallel_for(manifest.entries.size(), workers, [&](std::size_t i) {
    const auto& entry = manifest.entries[i];
    const auto id = entry.id();
    std::string stage = "ingest";
    try {
      const auto bytes = io::read_text_file(entry.path);
      const auto seg_key = segmentation_key(bytes, entry, seg_config);
      const auto seg_path = cache.path_for("segments", seg_key, ".bin");
      std::vector<PulseSegment> segments;
      stage = "segment";
      if (fs::exists(seg_path)) {
        segments = read_segment_dump(seg_path);
        jobs[i].seg_hit = true;
      } else {
        const auto rec = load_recording(entry.path, entry);
        segments = segment_recording(rec, seg_config).segments;
        write_atomically(seg_path, [&](const fs::path& p) { write_segment_dump(p, segments); });
      }
      if (segments.empty()) throw DataError("no pulses found");

      stage = "symbolize";
      const auto seed = derive_seed(config.seed, "subsample:" + id.subject, static_cast<std::uint64_t>(id.day));
      const auto sym_key = sha256_hex(seg_key + "|" + sym_meta + "|" + std::to_string(seed));
      const auto sym_path = cache.path_for("symbols", sym_key, ".txt");
      if (fs::exists(sym_path)) {
        auto vectors = read_symbol_vectors(sym_path);
        if (vectors.size() != 1) throw DataError("corrupt cache entry " + sym_path.string());
        jobs[i].vector = std::move(vectors.front());
        jobs[i].vector.id = id;
        jobs[i].sym_hit = true;
      } else {
        jobs[i].vector = symbolize_day(segments, id, sym_config, seed).vector;
        const SymbolVector one[] = {jobs[i].vector};
        write_atomically(sym_path, [&](const fs::path& p) { write_symbol_vectors(p, one); });
      }
      jobs[i].key = sym_key;
      spdlog::debug("{}: {} symbols ({} pulses)", id.token(), jobs[i].vector.k(), segments.size());
    } catch (const DataError& e) {
      throw DataError(stage + " stage, subject-day " + id.token() + ": " + e.what());
    }
  });

  std::vector<SymbolVector> out;
  for (auto& job : jobs) {
    ++(job.seg_hit ? summary.segmentation.hits : summary.segmentation.misses);
    ++(job.sym_hit ? summary.symbolization.hits : summary.symbolization.misses);
    out.push_back(std::move(job.vector));
  }
  return out;
}

namespace {

DistanceMatrix cached_mismatch(const std::vector<SymbolVector>& vectors, const PipelineConfig& config,
                               StageCache& cache, unsigned workers, RunSummary& summary) {
  std::string material = "mismatch|" + std::string(kVersion) + "|" + io::format_double(config.symbolization.kmeans.band_fraction);
  for (const auto& v : vectors) material += "|" + v.id.token() + "|" + format_symbol_vectors(std::span(&v, 1));
  const auto path = cache.path_for("mismatch", sha256_hex(material), ".bin");
  if (fs::exists(path)) {
    ++summary.mismatch.hits;
    return read_distance_binary(path);
  }
  ++summary.mismatch.misses;
  auto dm = mismatch_matrix(vectors, {config.symbolization.kmeans.band_fraction, workers});
  fs::create_directories(path.parent_path());
  write_distance_binary(path, dm);
  return dm;
}

bool has_labels(const DistanceMatrix& dm, const Comparison& c) {
  for (auto label : c.labels) {
    if (std::none_of(dm.ids.begin(), dm.ids.end(), [&](const SubjectDayId& id) { return id.label == label; })) {
      return false;
    }
  }
  return true;
}

}  // namespace

RunSummary run_pipeline(const PipelineConfig& config, const CohortManifest& manifest, const fs::path& out_dir,
                        const RunOptions& options) {
  config.validate();
  if (manifest.entries.size() < 2) throw DataError("manifest needs at least two subject-days");
  RunSummary summary;
  StageCache cache(options.stage_cache.value_or(out_dir / "cache"));
  const unsigned workers = std::max(1u, options.workers);
  auto emit = [&](const std::string& name, const std::string& content) {
    io::write_text_file(out_dir / name, content);
    summary.written.push_back(name);
  };

  spdlog::info("symbolizing {} subject-days", manifest.entries.size());
  const auto vectors = symbolize_cohort(config, manifest, config.segmentation.normalization, cache, workers, summary);
  emit("symbols.txt", format_symbol_vectors(vectors));

  spdlog::info("computing mismatch distances");
  const auto dm = cached_mismatch(vectors, config, cache, workers, summary);
  write_distance_csv(out_dir / "mismatch.csv", dm);
  summary.written.push_back("mismatch.csv");

  ordered_json run;
  run["version"] = kVersion;
  run["seed"] = config.seed;
  run["config"] = ordered_json::parse(pipeline_config_json(config));
  ordered_json inputs = ordered_json::array();
  for (const auto& e : manifest.entries) {
    inputs.push_back({{"id", e.id().token()},
                      {"file", e.path.filename().string()},
                      {"sha256", sha256_hex(io::read_text_file(e.path))}});
  }
  run["inputs"] = inputs;
  run["notes"] = {
      "centroids of different lengths are linearly resampled to the longer length before comparison",
      "ECDF(x) counts RRDM samples <= x; p = 1 - ECDF(observed)",
      "RRDM matrices are clustered with the same cluster count as the observed matrix"};

  // Concentration at the configured n.
  std::vector<Comparison> active;
  ordered_json skipped = ordered_json::array();
  for (const auto& c : resolve_comparisons(config.evaluation.comparisons)) {
    if (has_labels(dm, c)) active.push_back(c);
    else skipped.push_back(c.name);
  }
  run["comparisons"] = ordered_json::array();
  for (const auto& c : active) run["comparisons"].push_back(c.name);
  run["skipped_comparisons"] = skipped;

  std::vector<ConcentrationReport> reports;
  for (const auto& c : active) {
    spdlog::info("evaluating {} at n = {}", c.name, config.evaluation.n);
    const auto sub = select_labels(dm, c.labels);
    if (config.evaluation.n > sub.size()) {
      throw DataError("evaluate stage: n = " + std::to_string(config.evaluation.n) + " exceeds the " +
                      std::to_string(sub.size()) + " subject-days of " + c.name);
    }
    auto report = summarize(cluster_subject_days(sub, config.evaluation.n), c.name);
    report.rrdm = rrdm_significance(sub, config.evaluation.n, config.evaluation.trials,
                                    derive_seed(config.seed, "rrdm:" + c.name), workers);
    emit("heatmap_" + slug(c.name) + ".csv", heatmap_csv(report));
    emit("ecdf_" + slug(c.name) + ".csv", ecdf_csv(report.rrdm->samples));
    reports.push_back(std::move(report));
  }
  emit("report.json", concentration_json(reports));
  emit("report.csv", concentration_csv(reports));

  if (config.evaluation.sweep && !active.empty()) {
    std::size_t smallest = dm.size();
    for (const auto& c : active) smallest = std::min(smallest, select_labels(dm, c.labels).size());
    SweepConfig sweep;
    for (std::size_t n = config.evaluation.sweep_min; n <= std::min(config.evaluation.sweep_max, smallest); ++n) {
      sweep.n_values.push_back(n);
    }
    if (!sweep.n_values.empty()) {
      spdlog::info("sweeping n = {}..{}", sweep.n_values.front(), sweep.n_values.back());
      sweep.trials = config.evaluation.trials;
      sweep.seed = derive_seed(config.seed, "sweep");
      sweep.workers = workers;
      sweep.comparisons = active;
      const auto result = sensitivity_sweep(dm, sweep);
      emit("sweep.json", sweep_json(result));
      emit("sweep.csv", sweep_csv(result));
    }
  }

  if (config.evaluation.intra_subject) {
    CohortManifest patients;
    std::map<std::string, std::pair<bool, bool>> seen;
    for (const auto& e : manifest.entries) {
      if (e.class_label == ClassLabel::PreTx) seen[e.subject_id].first = true;
      if (e.class_label == ClassLabel::PostTx) seen[e.subject_id].second = true;
    }
    for (const auto& e : manifest.entries) {
      const auto it = seen.find(e.subject_id);
      if (it != seen.end() && it->second.first && it->second.second &&
          (e.class_label == ClassLabel::PreTx || e.class_label == ClassLabel::PostTx)) {
        patients.entries.push_back(e);
      }
    }
    if (patients.entries.size() >= 2) {
      spdlog::info("intra-subject comparison over {} subject-days", patients.entries.size());
      const auto intra_vectors =
          symbolize_cohort(config, patients, config.evaluation.intra_normalization, cache, workers, summary);
      const auto intra_dm = cached_mismatch(intra_vectors, config, cache, workers, summary);
      const auto intra = intra_subject_compare(intra_dm, config.evaluation.intra_n, config.evaluation.trials,
                                               derive_seed(config.seed, "intra"), workers);
      emit("intra_subject.json", concentration_json(intra));
      emit("intra_subject.csv", concentration_csv(intra));
      std::string table = "subject,n,total_class_concentration\n";
      for (const auto& r : intra) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < intra_dm.size(); ++i) {
          if (intra_dm.ids[i].subject == r.comparison) rows.push_back(i);
        }
        const auto sub = intra_dm.subset(rows);
        const auto dendrogram = ward_cluster(sub.condensed());
        for (std::size_t n = config.evaluation.intra_sweep_min;
             n <= std::min(config.evaluation.intra_sweep_max, sub.size()); ++n) {
          table += r.comparison + "," + std::to_string(n) + "," +
                   io::format_double(total_concentration(assignment_from_dendrogram(dendrogram, sub.ids, n),
                                                         ConcentrationMetric::Class)) +
                   "\n";
        }
      }
      emit("intra_sweep.csv", table);
    }
  }

  if (config.baselines.enabled) {
    spdlog::info("computing acoustic feature baselines");
    auto features = config.baselines.features;
    features.workers = 1;
    std::vector<std::vector<FeatureVector>> per_day(manifest.entries.size());
    parallel_for(manifest.entries.size(), workers, [&](std::size_t i) {
      const auto& entry = manifest.entries[i];
      try {
        per_day[i] = compute_vaf(load_recording(entry.path, entry), features);
      } catch (const DataError& e) {
        throw DataError("baseline stage, subject-day " + entry.id().token() + ": " + e.what());
      }
    });
    std::vector<FeatureVector> vaf, maf;
    for (const auto& day : per_day) {
      vaf.insert(vaf.end(), day.begin(), day.end());
      maf.push_back(compute_maf(day));
    }
    emit("vaf_features.csv", feature_csv(vaf));
    emit("maf_features.csv", feature_csv(maf));
    std::vector<ConcentrationReport> baseline_reports;
    for (const auto& c : active) {
      auto pick = [&](const std::vector<FeatureVector>& all) {
        std::vector<FeatureVector> out;
        for (const auto& v : all) {
          if (std::find(c.labels.begin(), c.labels.end(), v.id.label) != c.labels.end()) out.push_back(v);
        }
        return out;
      };
      const auto vaf_c = pick(vaf);
      const auto maf_c = pick(maf);
      const auto n = config.evaluation.n;
      if (n <= vaf_c.size()) {
        baseline_reports.push_back(
            summarize(cluster_vaf(vaf_c, n, derive_seed(config.seed, "vaf:" + c.name)).days, "VAF " + c.name));
      }
      if (n <= maf_c.size()) baseline_reports.push_back(summarize(cluster_maf(maf_c, n), "MAF " + c.name));
    }
    emit("baseline_report.json", concentration_json(baseline_reports));
    emit("baseline_report.csv", concentration_csv(baseline_reports));
    ordered_json kept = ordered_json::array();
    for (auto i : prune_correlated(vaf)) kept.push_back(feature_names()[i]);
    run["baseline_features"] = feature_names();
    run["baseline_uncorrelated_subset"] = kept;
  }

  emit("run_manifest.json", run.dump(2) + "\n");
  return summary;
}

}  // namespace vocalsym
