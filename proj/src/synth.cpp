#include "vocalsym/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "vocalsym/io.hpp"
#include "vocalsym/parallel.hpp"

namespace vocalsym {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

Series PulseTemplate::sample(std::size_t period) const {
  if (period == 0) throw std::invalid_argument("template period must be positive");
  Series out(period, 0.0);
  for (std::size_t k = 0; k < period; ++k) {
    const double phase = static_cast<double>(k) / static_cast<double>(period);
    for (const auto& b : bumps) {
      double d = std::fabs(phase - b.center);
      d = std::min(d, 1.0 - d);
      out[k] += b.amplitude * std::exp(-0.5 * d * d / (b.width * b.width));
    }
  }
  return out;
}

std::vector<PulseTemplate> default_templates() {
  return {
      {"rounded", {{0.0, 0.02, 1.0}, {0.30, 0.08, 0.45}}},
      {"notched", {{0.0, 0.02, 1.0}, {0.55, 0.05, -0.45}}},
      {"double", {{0.0, 0.02, 1.0}, {0.40, 0.10, 0.55}, {0.75, 0.04, -0.30}}},
      {"dip", {{0.0, 0.02, 1.0}, {0.15, 0.04, -0.50}, {0.50, 0.12, 0.30}, {0.85, 0.05, 0.25}}},
  };
}

void SynthSpec::validate() const {
  if (templates.empty()) throw std::invalid_argument("synth: no templates");
  if (classes.empty()) throw std::invalid_argument("synth: no classes");
  for (const auto& c : classes) {
    if (c.subject_prefix.empty()) throw std::invalid_argument("synth: empty subject prefix");
    if (c.subjects == 0) throw std::invalid_argument("synth: class without subjects");
    if (c.templates.empty() || c.templates.size() != c.weights.size()) {
      throw std::invalid_argument("synth: templates and weights must be nonempty and of equal length");
    }
    double total = 0.0;
    for (double w : c.weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("synth: negative mixing weight");
      total += w;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw std::invalid_argument("synth: mixing weights must sum to 1");
    for (auto t : c.templates) {
      if (t >= templates.size()) throw std::invalid_argument("synth: template index out of range");
    }
  }
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("synth: sample rate must be positive");
  if (!(min_pitch_hz > 0.0) || !(max_pitch_hz >= min_pitch_hz)) throw std::invalid_argument("synth: bad pitch range");
  if (sample_rate_hz / max_pitch_hz < 4.0) throw std::invalid_argument("synth: pitch too high for the sample rate");
  if (days_per_subject == 0) throw std::invalid_argument("synth: days_per_subject must be positive");
  if (!(day_seconds > 0.0)) throw std::invalid_argument("synth: day_seconds must be positive");
  if (!(voiced_fraction > 0.0 && voiced_fraction <= 1.0)) {
    throw std::invalid_argument("synth: voiced_fraction must lie in (0, 1]");
  }
  if (!(min_run_seconds > 0.0) || !(max_run_seconds >= min_run_seconds)) {
    throw std::invalid_argument("synth: bad run length range");
  }
  if (!(min_gap_seconds >= 0.0)) throw std::invalid_argument("synth: negative gap length");
  if (!(noise >= 0.0)) throw std::invalid_argument("synth: negative noise level");
  if (!(amplitude > 0.0)) throw std::invalid_argument("synth: amplitude must be positive");
}

SynthSpec two_class_spec(bool shared_alphabet, std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.classes.push_back({ClassLabel::Control, "C", 6, {0, 1}, {0.7, 0.3}});
  if (shared_alphabet) {
    spec.classes.push_back({ClassLabel::PreTx, "P", 6, {0, 1}, {0.7, 0.3}});
  } else {
    spec.classes.push_back({ClassLabel::PreTx, "P", 6, {2, 3}, {0.7, 0.3}});
  }
  return spec;
}

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double gaussian(std::mt19937_64& rng) {
  // Box-Muller, written out so every platform draws the same stream.
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::string subject_name(const SynthClass& c, std::size_t subject) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", subject + 1);
  return c.subject_prefix + buf;
}

/// Day offset for classes that share a subject prefix with earlier classes.
std::size_t day_offset(const SynthSpec& spec, std::size_t class_index) {
  std::size_t offset = 0;
  for (std::size_t c = 0; c < class_index; ++c) {
    if (spec.classes[c].subject_prefix == spec.classes[class_index].subject_prefix) offset += spec.days_per_subject;
  }
  return offset;
}

ordered_json spec_json(const SynthSpec& spec) {
  ordered_json j;
  ordered_json templates = ordered_json::array();
  for (const auto& t : spec.templates) {
    ordered_json bumps = ordered_json::array();
    for (const auto& b : t.bumps) bumps.push_back({{"center", b.center}, {"width", b.width}, {"amplitude", b.amplitude}});
    templates.push_back({{"name", t.name}, {"bumps", bumps}});
  }
  j["templates"] = templates;
  ordered_json classes = ordered_json::array();
  for (const auto& c : spec.classes) {
    classes.push_back({{"label", std::string(to_string(c.label))},
                       {"subject_prefix", c.subject_prefix},
                       {"subjects", c.subjects},
                       {"templates", c.templates},
                       {"weights", c.weights}});
  }
  j["classes"] = classes;
  j["sample_rate_hz"] = spec.sample_rate_hz;
  j["min_pitch_hz"] = spec.min_pitch_hz;
  j["max_pitch_hz"] = spec.max_pitch_hz;
  j["days_per_subject"] = spec.days_per_subject;
  j["day_seconds"] = spec.day_seconds;
  j["voiced_fraction"] = spec.voiced_fraction;
  j["min_run_seconds"] = spec.min_run_seconds;
  j["max_run_seconds"] = spec.max_run_seconds;
  j["min_gap_seconds"] = spec.min_gap_seconds;
  j["noise"] = spec.noise;
  j["amplitude"] = spec.amplitude;
  j["calibration"] = spec.calibration;
  j["format"] = spec.format == SignalFormat::Wav ? "wav" : "csv";
  j["seed"] = spec.seed;
  return j;
}

}  // namespace

SynthSpec synth_spec_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
  if (!j.is_object()) throw DataError("synth spec: expected a JSON object");
  SynthSpec spec;
  try {
    if (j.contains("templates")) {
      spec.templates.clear();
      for (const auto& t : j.at("templates")) {
        PulseTemplate pt;
        pt.name = t.value("name", "");
        for (const auto& b : t.at("bumps")) {
          pt.bumps.push_back({b.at("center").get<double>(), b.at("width").get<double>(), b.at("amplitude").get<double>()});
        }
        spec.templates.push_back(std::move(pt));
      }
    }
    for (const auto& c : j.at("classes")) {
      SynthClass sc;
      sc.label = parse_class_label(c.at("label").get<std::string>());
      sc.subject_prefix = c.at("subject_prefix").get<std::string>();
      sc.subjects = c.at("subjects").get<std::size_t>();
      sc.templates = c.at("templates").get<std::vector<std::size_t>>();
      sc.weights = c.at("weights").get<std::vector<double>>();
      spec.classes.push_back(std::move(sc));
    }
    spec.sample_rate_hz = j.value("sample_rate_hz", spec.sample_rate_hz);
    spec.min_pitch_hz = j.value("min_pitch_hz", spec.min_pitch_hz);
    spec.max_pitch_hz = j.value("max_pitch_hz", spec.max_pitch_hz);
    spec.days_per_subject = j.value("days_per_subject", spec.days_per_subject);
    spec.day_seconds = j.value("day_seconds", spec.day_seconds);
    spec.voiced_fraction = j.value("voiced_fraction", spec.voiced_fraction);
    spec.min_run_seconds = j.value("min_run_seconds", spec.min_run_seconds);
    spec.max_run_seconds = j.value("max_run_seconds", spec.max_run_seconds);
    spec.min_gap_seconds = j.value("min_gap_seconds", spec.min_gap_seconds);
    spec.noise = j.value("noise", spec.noise);
    spec.amplitude = j.value("amplitude", spec.amplitude);
    spec.calibration = j.value("calibration", spec.calibration);
    const auto format = j.value("format", std::string("wav"));
    if (format == "wav") spec.format = SignalFormat::Wav;
    else if (format == "csv") spec.format = SignalFormat::Csv;
    else throw DataError("synth spec: format must be wav or csv");
    spec.seed = j.value("seed", spec.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) { return spec_json(spec).dump(2) + "\n"; }

std::vector<CalibrationPair> synth_calibration() { return {{0.01, 60.0}, {0.1, 80.0}, {1.0, 100.0}}; }

SynthDay synthesize_day(const SynthSpec& spec, std::size_t class_index, std::size_t subject, std::size_t day) {
  spec.validate();
  const auto& cls = spec.classes.at(class_index);
  if (subject >= cls.subjects || day >= spec.days_per_subject) throw std::invalid_argument("synth: day out of range");
  SynthDay out;
  out.id = {subject_name(cls, subject), static_cast<std::int64_t>(day_offset(spec, class_index) + day), cls.label};
  std::mt19937_64 rng(derive_seed(spec.seed, "synth-day", class_index * 1000003u + subject, day));

  out.pitch_hz = spec.min_pitch_hz + (spec.max_pitch_hz - spec.min_pitch_hz) * unit_uniform(rng);
  const auto period = static_cast<std::size_t>(std::max(4.0, std::round(spec.sample_rate_hz / out.pitch_hz)));
  const auto total = static_cast<std::size_t>(std::llround(spec.day_seconds * spec.sample_rate_hz));
  const auto voiced_target = static_cast<std::size_t>(std::llround(spec.voiced_fraction * static_cast<double>(total)));
  const auto min_run = static_cast<std::size_t>(std::llround(spec.min_run_seconds * spec.sample_rate_hz));
  const auto max_run = static_cast<std::size_t>(std::llround(spec.max_run_seconds * spec.sample_rate_hz));
  const auto min_gap = static_cast<std::size_t>(std::llround(spec.min_gap_seconds * spec.sample_rate_hz));

  // Run lengths until the voiced budget is used; the last run takes the remainder.
  std::vector<std::size_t> lengths;
  if (voiced_target >= total) {
    lengths.push_back(total);
  } else {
    std::size_t used = 0;
    while (used < voiced_target) {
      auto len = min_run + static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(max_run - min_run + 1));
      len = std::min(len, voiced_target - used);
      lengths.push_back(len);
      used += len;
    }
  }
  const std::size_t voiced = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
  const std::size_t silent = total - voiced;
  const std::size_t gaps = voiced >= total ? 0 : lengths.size() + 1;
  std::vector<std::size_t> gap_len(gaps, 0);
  if (gaps > 0) {
    // Interior gaps get the minimum first; the rest is split at random.
    const std::size_t interior = lengths.size() - 1;
    const std::size_t reserved = std::min(silent, interior * min_gap);
    std::vector<double> w(gaps);
    double wsum = 0.0;
    for (auto& x : w) wsum += (x = unit_uniform(rng) + 1e-3);
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < gaps; ++g) {
      gap_len[g] = static_cast<std::size_t>(std::floor(w[g] / wsum * static_cast<double>(silent - reserved)));
      assigned += gap_len[g];
    }
    gap_len.back() += silent - reserved - assigned;
    for (std::size_t g = 1; g + 1 < gaps; ++g) gap_len[g] += reserved / std::max<std::size_t>(1, interior);
    gap_len.back() += reserved - (interior > 0 ? (reserved / interior) * interior : 0);
  }

  out.samples.assign(total, 0.0);
  std::vector<Series> shapes(spec.templates.size());
  std::size_t cursor = gaps > 0 ? gap_len[0] : 0;
  for (std::size_t r = 0; r < lengths.size(); ++r) {
    double pick = unit_uniform(rng);
    std::size_t t = cls.templates.back();
    for (std::size_t i = 0; i < cls.templates.size(); ++i) {
      if (pick < cls.weights[i]) {
        t = cls.templates[i];
        break;
      }
      pick -= cls.weights[i];
    }
    if (shapes[t].empty()) shapes[t] = spec.templates[t].sample(period);
    const std::size_t phase0 = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(period));
    VoicedRun run{cursor, cursor + lengths[r], t, period, 0};
    std::size_t peaks = 0;
    for (std::size_t s = run.start_sample; s < run.end_sample; ++s) {
      const std::size_t k = (s - run.start_sample + phase0) % period;
      out.samples[s] = spec.amplitude * shapes[t][k];
      if (k == 0) ++peaks;
    }
    run.pulses = peaks > 0 ? peaks - 1 : 0;
    out.runs.push_back(run);
    cursor = run.end_sample + (gaps > 0 ? gap_len[r + 1] : 0);
  }
  if (spec.noise > 0.0) {
    const double sd = spec.noise * spec.amplitude;
    for (auto& x : out.samples) x += sd * gaussian(rng);
  }
  return out;
}

std::string truth_json(const SynthDay& day, const SynthSpec& spec) {
  ordered_json j;
  j["subject"] = day.id.subject;
  j["day"] = day.id.day;
  j["label"] = std::string(to_string(day.id.label));
  j["pitch_hz"] = day.pitch_hz;
  j["sample_rate_hz"] = spec.sample_rate_hz;
  std::size_t pulses = 0;
  ordered_json runs = ordered_json::array();
  for (const auto& r : day.runs) {
    pulses += r.pulses;
    runs.push_back({{"start_sample", r.start_sample},
                    {"end_sample", r.end_sample},
                    {"template", r.template_id},
                    {"template_name", spec.templates[r.template_id].name},
                    {"period_samples", r.period_samples},
                    {"pulses", r.pulses}});
  }
  j["pulses"] = pulses;
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

GeneratedCohort generate_cohort(const SynthSpec& spec, const fs::path& out_dir, unsigned workers) {
  spec.validate();
  struct Job {
    std::size_t cls, subject, day;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    for (std::size_t s = 0; s < spec.classes[c].subjects; ++s) {
      for (std::size_t d = 0; d < spec.days_per_subject; ++d) jobs.push_back({c, s, d});
    }
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  GeneratedCohort cohort;
  cohort.manifest.entries.resize(jobs.size());
  const char* ext = spec.format == SignalFormat::Wav ? ".wav" : ".csv";
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto day = synthesize_day(spec, job.cls, job.subject, job.day);
    const auto name = day.id.subject + "_d" + std::to_string(day.id.day);
    const auto path = out_dir / (name + ext);
    if (spec.format == SignalFormat::Wav) {
      write_wav(path, day.samples, static_cast<std::uint32_t>(std::llround(spec.sample_rate_hz)));
    } else {
      write_csv_signal(path, day.samples);
    }
    io::write_text_file(out_dir / (name + ext + std::string(".truth.json")), truth_json(day, spec));
    auto& entry = cohort.manifest.entries[i];
    entry.path = path;
    entry.subject_id = day.id.subject;
    entry.day_index = day.id.day;
    entry.class_label = day.id.label;
    entry.sample_rate_hz = spec.sample_rate_hz;
    if (spec.calibration) entry.calibration = synth_calibration();
  });
  cohort.manifest_path = out_dir / "manifest.json";
  save_manifest(cohort.manifest, cohort.manifest_path);
  io::write_text_file(out_dir / "spec.json", synth_spec_to_json(spec));
  return cohort;
}

}  // namespace vocalsym
