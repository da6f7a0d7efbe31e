#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vocalsym/baselines.hpp"
#include "vocalsym/distance_matrix.hpp"
#include "vocalsym/evaluation.hpp"
#include "vocalsym/ingest.hpp"
#include "vocalsym/io.hpp"
#include "vocalsym/mismatch.hpp"
#include "vocalsym/pipeline.hpp"
#include "vocalsym/segmentation.hpp"
#include "vocalsym/symbolization.hpp"
#include "vocalsym/synth.hpp"

namespace fs = std::filesystem;
using namespace vocalsym;

namespace {

struct Options {
  std::string config;
  std::string manifest;
  std::string out;
  unsigned workers = 1;
  std::optional<std::uint64_t> seed;
  std::string stage_cache;
  bool verbose = false;

  // subcommand specifics
  std::string spec;
  std::string preset = "separated";
  std::string input;
  double sample_rate = 0.0;
  std::string subject = "S01";
  std::int64_t day = 0;
  std::string label;
  bool csv = false;
  std::vector<std::string> segments;
  std::string labels;
  std::string symbols;
  std::string distances;
  std::size_t n = 0;
  std::size_t trials = 0;
  std::size_t from = 2;
  std::size_t to = 40;
  std::vector<std::string> comparisons;
};

PipelineConfig load_config(const Options& o) {
  PipelineConfig config = o.config.empty() ? PipelineConfig{} : load_pipeline_config(o.config);
  if (o.seed) config.seed = *o.seed;
  return config;
}

std::uint64_t seed_of(const Options& o, const PipelineConfig& config) { return o.seed.value_or(config.seed); }

DistanceMatrix load_matrix(const Options& o) {
  const fs::path path(o.distances);
  auto dm = path.extension() == ".csv" ? read_distance_csv(path) : read_distance_binary(path);
  if (!o.labels.empty()) apply_labels(dm, read_label_csv(o.labels));
  return dm;
}

/// Named comparisons, or one comparison over every label present.
std::vector<Comparison> comparisons_for(const Options& o, const DistanceMatrix& dm) {
  if (!o.comparisons.empty()) return resolve_comparisons(o.comparisons);
  std::vector<ClassLabel> labels;
  for (const auto& id : dm.ids) {
    if (std::find(labels.begin(), labels.end(), id.label) == labels.end()) labels.push_back(id.label);
  }
  std::sort(labels.begin(), labels.end());
  return {{"all", labels}};
}

std::string slug(std::string_view comparison) {
  std::string out;
  for (char c : comparison) out += c == '/' ? std::string("_vs_") : std::string(1, c);
  return out;
}

int cmd_synth(const Options& o) {
  SynthSpec spec;
  if (!o.spec.empty()) {
    spec = synth_spec_from_json(io::read_text_file(o.spec));
    if (o.seed) spec.seed = *o.seed;
  } else if (o.preset == "separated" || o.preset == "null") {
    spec = two_class_spec(o.preset == "null", o.seed.value_or(1));
  } else {
    throw std::invalid_argument("unknown preset '" + o.preset + "' (use separated or null)");
  }
  const auto cohort = generate_cohort(spec, o.out, o.workers);
  spdlog::info("wrote {} recordings and {}", cohort.manifest.entries.size(), cohort.manifest_path.string());
  return 0;
}

int cmd_segment(const Options& o) {
  const auto config = load_config(o);
  CohortManifest manifest;
  if (!o.manifest.empty()) {
    manifest = load_manifest(o.manifest);
  } else if (!o.input.empty()) {
    ManifestEntry e;
    e.path = o.input;
    e.subject_id = o.subject;
    e.day_index = o.day;
    e.class_label = parse_class_label(o.label);
    if (o.sample_rate > 0.0) e.sample_rate_hz = o.sample_rate;
    manifest.entries.push_back(e);
  } else {
    throw std::invalid_argument("segment needs --manifest or --input");
  }
  for (const auto& e : manifest.entries) {
    const auto rec = load_recording(e.path, e);
    const auto result = segment_recording(rec, config.segmentation);
    const auto base = fs::path(o.out) / (e.subject_id + "_d" + std::to_string(e.day_index));
    write_segment_dump(base.string() + ".segments.bin", result.segments);
    if (o.csv) write_segment_csv(base.string() + ".segments.csv", result.segments);
    spdlog::info("{}: {} pulses from {} voiced regions", e.id().token(), result.segments.size(),
                 result.voicing.voiced.size());
  }
  return 0;
}

int cmd_symbolize(const Options& o) {
  const auto config = load_config(o);
  std::map<std::string, ClassLabel> labels;
  if (!o.labels.empty()) labels = read_label_csv(o.labels);
  std::vector<SymbolVector> out;
  auto sym = config.symbolization;
  sym.kmeans.workers = o.workers;
  for (const auto& file : o.segments) {
    const fs::path path(file);
    auto segments = path.extension() == ".csv" ? read_segment_csv(path) : read_segment_dump(path);
    // One dump may hold several subject-days; symbolize each separately.
    std::map<std::pair<std::string, std::int64_t>, std::vector<PulseSegment>> days;
    for (auto& s : segments) days[{s.subject_id, s.day_index}].push_back(std::move(s));
    for (auto& [key, pulses] : days) {
      SubjectDayId id{key.first, key.second, ClassLabel::Unlabeled};
      if (const auto it = labels.find(key.first + ":" + std::to_string(key.second)); it != labels.end()) {
        id.label = it->second;
      }
      const auto seed = derive_seed(config.seed, "subsample:" + id.subject, static_cast<std::uint64_t>(id.day));
      auto result = symbolize_day(pulses, id, sym, seed);
      spdlog::info("{}: k = {} over {} pulses", id.token(), result.vector.k(), pulses.size());
      out.push_back(std::move(result.vector));
    }
  }
  write_symbol_vectors(o.out, out);
  return 0;
}

int cmd_mismatch(const Options& o) {
  const auto config = load_config(o);
  const auto vectors = read_symbol_vectors(o.symbols);
  const auto dm = mismatch_matrix(vectors, {config.symbolization.kmeans.band_fraction, o.workers});
  if (fs::path(o.out).extension() == ".csv") write_distance_csv(o.out, dm);
  else write_distance_binary(o.out, dm);
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto config = load_config(o);
  const auto dm = load_matrix(o);
  const std::size_t n = o.n ? o.n : config.evaluation.n;
  const std::size_t trials = o.trials ? o.trials : config.evaluation.trials;
  std::vector<ConcentrationReport> reports;
  for (const auto& c : comparisons_for(o, dm)) {
    const auto sub = select_labels(dm, c.labels);
    auto report = summarize(cluster_subject_days(sub, n), c.name);
    report.rrdm = rrdm_significance(sub, n, trials, derive_seed(seed_of(o, config), "rrdm:" + c.name), o.workers);
    io::write_text_file(fs::path(o.out) / ("heatmap_" + slug(c.name) + ".csv"), heatmap_csv(report));
    io::write_text_file(fs::path(o.out) / ("ecdf_" + slug(c.name) + ".csv"), ecdf_csv(report.rrdm->samples));
    reports.push_back(std::move(report));
  }
  io::write_text_file(fs::path(o.out) / "report.json", concentration_json(reports));
  io::write_text_file(fs::path(o.out) / "report.csv", concentration_csv(reports));
  for (const auto& r : reports) {
    std::cout << r.comparison << ": class " << io::format_double(r.total_class_concentration) << ", subject "
              << io::format_double(r.total_subject_concentration) << ", p " << io::format_double(r.rrdm->p_value)
              << "\n";
  }
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto config = load_config(o);
  const auto dm = load_matrix(o);
  SweepConfig sweep;
  for (std::size_t n = o.from; n <= o.to; ++n) sweep.n_values.push_back(n);
  sweep.trials = o.trials ? o.trials : config.evaluation.trials;
  sweep.seed = derive_seed(seed_of(o, config), "sweep");
  sweep.workers = o.workers;
  sweep.comparisons = comparisons_for(o, dm);
  const auto result = sensitivity_sweep(dm, sweep);
  io::write_text_file(fs::path(o.out) / "sweep.json", sweep_json(result));
  io::write_text_file(fs::path(o.out) / "sweep.csv", sweep_csv(result));
  return 0;
}

int cmd_baseline(const Options& o) {
  const auto config = load_config(o);
  const auto manifest = load_manifest(o.manifest);
  const std::size_t n = o.n ? o.n : config.evaluation.n;
  std::vector<FeatureVector> vaf, maf;
  auto features = config.baselines.features;
  features.workers = o.workers;
  for (const auto& e : manifest.entries) {
    const auto windows = compute_vaf(load_recording(e.path, e), features);
    vaf.insert(vaf.end(), windows.begin(), windows.end());
    maf.push_back(compute_maf(windows));
  }
  io::write_text_file(fs::path(o.out) / "vaf_features.csv", feature_csv(vaf));
  io::write_text_file(fs::path(o.out) / "maf_features.csv", feature_csv(maf));
  std::vector<ConcentrationReport> reports;
  reports.push_back(summarize(cluster_vaf(vaf, n, derive_seed(seed_of(o, config), "vaf:all")).days, "VAF"));
  reports.push_back(summarize(cluster_maf(maf, n), "MAF"));
  io::write_text_file(fs::path(o.out) / "baseline_report.json", concentration_json(reports));
  io::write_text_file(fs::path(o.out) / "baseline_report.csv", concentration_csv(reports));
  return 0;
}

int cmd_run(const Options& o) {
  const auto config = load_config(o);
  const auto manifest = load_manifest(o.manifest);
  RunOptions run;
  run.workers = o.workers;
  if (!o.stage_cache.empty()) run.stage_cache = o.stage_cache;
  const auto summary = run_pipeline(config, manifest, o.out, run);
  spdlog::info("cache: segments {} hit / {} miss, symbols {} hit / {} miss, mismatch {} hit / {} miss",
               summary.segmentation.hits, summary.segmentation.misses, summary.symbolization.hits,
               summary.symbolization.misses, summary.mismatch.hits, summary.mismatch.misses);
  for (const auto& f : summary.written) std::cout << (fs::path(o.out) / f).string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic pulse-shape analysis of voice recordings"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "Master seed (overrides the config)");
  app.add_flag("-v,--verbose", o.verbose, "Debug logging");

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", o.config, "Pipeline config (JSON)")->check(CLI::ExistingFile); };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth->add_option("--spec", o.spec, "Synth spec (JSON)")->check(CLI::ExistingFile);
  synth->add_option("--preset", o.preset, "separated or null (when no --spec)");
  synth->add_option("--out", o.out, "Output directory")->required();

  auto* segment = app.add_subcommand("segment", "Segment recordings into pulses");
  add_config(segment);
  segment->add_option("--manifest", o.manifest, "Cohort manifest (JSON)")->check(CLI::ExistingFile);
  segment->add_option("--input", o.input, "Single WAV or CSV recording")->check(CLI::ExistingFile);
  segment->add_option("--sample-rate", o.sample_rate, "Sample rate for CSV input");
  segment->add_option("--subject", o.subject, "Subject id for --input");
  segment->add_option("--day", o.day, "Day index for --input");
  segment->add_option("--label", o.label, "Class label for --input");
  segment->add_flag("--csv", o.csv, "Also write CSV exports");
  segment->add_option("--out", o.out, "Output directory")->required();

  auto* symbolize = app.add_subcommand("symbolize", "Symbolize segment dumps");
  add_config(symbolize);
  symbolize->add_option("--segments", o.segments, "Segment dumps (.bin or .csv)")->required()->check(CLI::ExistingFile);
  symbolize->add_option("--labels", o.labels, "Label CSV (id,label)")->check(CLI::ExistingFile);
  symbolize->add_option("--out", o.out, "Symbol vector file")->required();

  auto* mismatch = app.add_subcommand("mismatch", "Pairwise symbolic mismatch");
  add_config(mismatch);
  mismatch->add_option("--symbols", o.symbols, "Symbol vector file")->required()->check(CLI::ExistingFile);
  mismatch->add_option("--out", o.out, "Distance matrix (.csv, otherwise binary)")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Cluster a distance matrix and test concentration");
  add_config(evaluate);
  evaluate->add_option("--distances", o.distances, "Distance matrix")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--labels", o.labels, "Label CSV (id,label)")->check(CLI::ExistingFile);
  evaluate->add_option("--n", o.n, "Cluster count");
  evaluate->add_option("--trials", o.trials, "RRDM trials");
  evaluate->add_option("--comparison", o.comparisons, "Comparison such as PreTx/Con (repeatable)");
  evaluate->add_option("--out", o.out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Concentration across cluster counts");
  add_config(sweep);
  sweep->add_option("--distances", o.distances, "Distance matrix")->required()->check(CLI::ExistingFile);
  sweep->add_option("--labels", o.labels, "Label CSV (id,label)")->check(CLI::ExistingFile);
  sweep->add_option("--from", o.from, "Smallest n")->check(CLI::PositiveNumber);
  sweep->add_option("--to", o.to, "Largest n")->check(CLI::PositiveNumber);
  sweep->add_option("--trials", o.trials, "RRDM trials");
  sweep->add_option("--comparison", o.comparisons, "Comparison such as PreTx/Con (repeatable)");
  sweep->add_option("--out", o.out, "Output directory")->required();

  auto* baseline = app.add_subcommand("baseline", "Acoustic feature baselines");
  add_config(baseline);
  baseline->add_option("--manifest", o.manifest, "Cohort manifest (JSON)")->required()->check(CLI::ExistingFile);
  baseline->add_option("--n", o.n, "Cluster count");
  baseline->add_option("--out", o.out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Full pipeline with stage caching");
  add_config(run);
  run->add_option("--manifest", o.manifest, "Cohort manifest (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", o.out, "Output directory")->required();
  run->add_option("--stage-cache", o.stage_cache, "Cache directory (default <out>/cache)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    // Usage errors print the message followed by the relevant help text.
    const auto parsed = app.get_subcommands();
    std::cerr << "error: " << e.what() << "\n\n" << (parsed.empty() ? app.help() : parsed.front()->help());
    return 1;
  }

  auto logger = spdlog::stderr_color_mt("vocalsym");
  spdlog::set_default_logger(logger);
  spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*synth) return cmd_synth(o);
    if (*segment) return cmd_segment(o);
    if (*symbolize) return cmd_symbolize(o);
    if (*mismatch) return cmd_mismatch(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*sweep) return cmd_sweep(o);
    if (*baseline) return cmd_baseline(o);
    if (*run) return cmd_run(o);
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return 3;
  }
  return 3;
}
