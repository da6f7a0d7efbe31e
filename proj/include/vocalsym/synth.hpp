#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vocalsym/ingest.hpp"

namespace vocalsym {

/// Gaussian bump on the circular pulse phase [0, 1).
struct Bump {
  double center = 0.0;
  double width = 0.02;
  double amplitude = 1.0;
};

struct PulseTemplate {
  std::string name;
  std::vector<Bump> bumps;

  /// One period sampled at phases k / period, k = 0..period-1.
  Series sample(std::size_t period) const;
};

/// Four pulse shapes, each with its main peak (height 1) at phase 0.
std::vector<PulseTemplate> default_templates();

struct SynthClass {
  ClassLabel label = ClassLabel::Control;
  /// Classes sharing a prefix share subject ids (e.g. the same patients
  /// before and after treatment); their days are numbered consecutively.
  std::string subject_prefix;
  std::size_t subjects = 1;
  std::vector<std::size_t> templates;  // indices into SynthSpec::templates
  std::vector<double> weights;         // sums to 1
};

enum class SignalFormat { Wav, Csv };

struct SynthSpec {
  std::vector<PulseTemplate> templates = default_templates();
  std::vector<SynthClass> classes;
  double sample_rate_hz = 8000.0;
  double min_pitch_hz = 150.0;
  double max_pitch_hz = 250.0;
  std::size_t days_per_subject = 4;
  double day_seconds = 30.0;
  double voiced_fraction = 0.10;
  double min_run_seconds = 0.3;
  double max_run_seconds = 1.0;
  double min_gap_seconds = 0.2;
  /// Gaussian noise std relative to the pulse amplitude.
  double noise = 0.01;
  double amplitude = 0.5;
  bool calibration = true;
  SignalFormat format = SignalFormat::Wav;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
};

/// Two classes with 6 subjects each; disjoint alphabets ({0,1} vs {2,3}) or
/// a shared one ({0,1} for both), weights 0.7/0.3.
SynthSpec two_class_spec(bool shared_alphabet, std::uint64_t seed);

SynthSpec synth_spec_from_json(std::string_view text);
std::string synth_spec_to_json(const SynthSpec& spec);

struct VoicedRun {
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;
  std::size_t template_id = 0;
  std::size_t period_samples = 0;
  /// Complete peak-to-peak periods inside the run.
  std::size_t pulses = 0;
};

struct SynthDay {
  SubjectDayId id;
  Series samples;
  double pitch_hz = 0.0;
  std::vector<VoicedRun> runs;
};

/// Deterministic in (spec.seed, class index, subject, day).
SynthDay synthesize_day(const SynthSpec& spec, std::size_t class_index, std::size_t subject, std::size_t day);

/// Calibration pairs consistent with an intercept of 100 dB and slope 20.
std::vector<CalibrationPair> synth_calibration();

struct GeneratedCohort {
  CohortManifest manifest;
  std::filesystem::path manifest_path;
};

/// Writes every subject-day (signal + "<file>.truth.json"), plus
/// manifest.json and spec.json, under `out_dir`.
GeneratedCohort generate_cohort(const SynthSpec& spec, const std::filesystem::path& out_dir, unsigned workers = 1);

std::string truth_json(const SynthDay& day, const SynthSpec& spec);

}  // namespace vocalsym
