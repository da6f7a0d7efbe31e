#include "vocalsym/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "vocalsym/io.hpp"

namespace vocalsym {

namespace fs = std::filesystem;
using nlohmann::json;

CohortManifest load_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw DataError("manifest " + path.string() + ": missing 'entries' array");
  }
  std::optional<double> default_rate;
  if (doc.contains("sample_rate_hz")) default_rate = doc["sample_rate_hz"].get<double>();

  const auto base = path.parent_path();
  CohortManifest manifest;
  std::set<std::pair<std::string, std::int64_t>> seen;
  for (const auto& e : doc["entries"]) {
    try {
      ManifestEntry entry;
      entry.path = fs::path(e.at("path").get<std::string>());
      if (entry.path.is_relative()) entry.path = base / entry.path;
      entry.subject_id = e.at("subject").get<std::string>();
      entry.day_index = e.at("day").get<std::int64_t>();
      entry.class_label = parse_class_label(e.value("label", std::string("Unlabeled")));
      if (e.contains("sample_rate_hz")) {
        entry.sample_rate_hz = e["sample_rate_hz"].get<double>();
      } else {
        entry.sample_rate_hz = default_rate;
      }
      if (e.contains("calibration")) {
        for (const auto& p : e["calibration"]) {
          entry.calibration.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
      }
      if (entry.subject_id.empty() || entry.subject_id.find(':') != std::string::npos) {
        throw DataError("subject id must be nonempty and contain no ':'");
      }
      if (entry.day_index < 0) throw DataError("day index must be nonnegative");
      if (entry.sample_rate_hz && !(*entry.sample_rate_hz > 0.0)) {
        throw DataError("sample_rate_hz must be positive");
      }
      if (!seen.emplace(entry.subject_id, entry.day_index).second) {
        throw DataError("duplicate subject-day " + entry.subject_id + ":" +
                        std::to_string(entry.day_index));
      }
      if (!fs::exists(entry.path)) throw DataError("missing file " + entry.path.string());
      manifest.entries.push_back(std::move(entry));
    } catch (const json::exception& ex) {
      throw DataError("manifest " + path.string() + ": " + ex.what());
    }
  }
  return manifest;
}

void save_manifest(const CohortManifest& manifest, const fs::path& path) {
  json entries = json::array();
  const auto base = path.parent_path();
  for (const auto& e : manifest.entries) {
    json j;
    auto rel = e.path.lexically_relative(base);
    j["path"] = (rel.empty() || *rel.begin() == "..") ? e.path.generic_string()
                                                       : rel.generic_string();
    j["subject"] = e.subject_id;
    j["day"] = e.day_index;
    j["label"] = std::string(to_string(e.class_label));
    if (e.sample_rate_hz) j["sample_rate_hz"] = *e.sample_rate_hz;
    if (!e.calibration.empty()) {
      json cal = json::array();
      for (const auto& p : e.calibration) cal.push_back({p.rms, p.db_spl});
      j["calibration"] = cal;
    }
    entries.push_back(std::move(j));
  }
  io::write_text_file(path, json{{"entries", entries}}.dump(2) + "\n");
}

namespace {

std::uint32_t le32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + i]);
  return v;
}

std::uint16_t le16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

struct WavData {
  Series samples;
  double rate = 0.0;
};

WavData parse_wav(std::string_view bytes, const std::string& name) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw DataError(name + ": not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= bytes.size()) {
    const auto id = bytes.substr(pos, 4);
    const std::size_t size = le32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw DataError(name + ": truncated chunk");
    if (id == "fmt ") {
      if (size < 16) throw DataError(name + ": short fmt chunk");
      const auto format = le16(bytes, body);
      channels = le16(bytes, body + 2);
      rate = le32(bytes, body + 4);
      bits = le16(bytes, body + 14);
      if (format != 1) throw DataError(name + ": only integer PCM WAV is supported");
      if (channels != 1) throw DataError(name + ": multi-channel WAV is not supported");
      if (bits != 16) throw DataError(name + ": only 16-bit WAV is supported");
      if (rate == 0) throw DataError(name + ": zero sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError(name + ": data chunk before fmt chunk");
      const std::size_t n = size / 2;
      if (n == 0) throw DataError(name + ": zero-length signal");
      WavData out;
      out.rate = rate;
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto raw = static_cast<std::int16_t>(le16(bytes, body + 2 * i));
        out.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw DataError(name + ": no data chunk");
}

Series parse_csv_signal(std::string_view text, const std::string& name) {
  Series out;
  std::size_t line_no = 0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    line = io::trim(line);
    if (line.empty()) continue;
    try {
      out.push_back(io::parse_double(line));
    } catch (const DataError& e) {
      throw DataError(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError(name + ": zero-length signal");
  return out;
}

}  // namespace

RawRecording load_recording(const fs::path& path, const ManifestEntry& entry) {
  const auto bytes = io::read_text_file(path);
  RawRecording rec;
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".wav") {
    auto wav = parse_wav(bytes, path.string());
    rec.samples = std::move(wav.samples);
    rec.sample_rate_hz = wav.rate;
  } else {
    rec.samples = parse_csv_signal(bytes, path.string());
    if (!entry.sample_rate_hz) {
      throw DataError(path.string() + ": CSV input needs sample_rate_hz in the manifest");
    }
    rec.sample_rate_hz = *entry.sample_rate_hz;
  }
  if (!(rec.sample_rate_hz > 0.0)) throw DataError(path.string() + ": nonpositive sample rate");
  rec.subject_id = entry.subject_id;
  rec.day_index = entry.day_index;
  rec.class_label = entry.class_label;
  rec.calibration = fit_calibration(entry.calibration);
  return rec;
}

void write_wav(const fs::path& path, std::span<const double> samples, std::uint32_t rate) {
  io::BinaryWriter w;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  w.raw("RIFF");
  w.u32(36 + data_bytes);
  w.raw("WAVE");
  w.raw("fmt ");
  w.u32(16);
  io::BinaryWriter f;
  f.u32(1u | (1u << 16));  // PCM, mono
  f.u32(rate);
  f.u32(rate * 2);         // byte rate
  f.u32(2u | (16u << 16));  // block align, bits per sample
  w.raw(f.bytes());
  w.raw("data");
  w.u32(data_bytes);
  std::string pcm;
  pcm.reserve(samples.size() * 2);
  for (double s : samples) {
    const double q = std::nearbyint(std::clamp(s, -1.0, 32767.0 / 32768.0) * 32768.0);
    const auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
    pcm.push_back(static_cast<char>(v & 0xFF));
    pcm.push_back(static_cast<char>(v >> 8));
  }
  w.raw(pcm);
  io::write_text_file(path, w.bytes());
}

void write_csv_signal(const fs::path& path, std::span<const double> samples) {
  std::string text;
  text.reserve(samples.size() * 12);
  for (double s : samples) {
    text += io::format_double(s);
    text += '\n';
  }
  io::write_text_file(path, text);
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double level_db(std::span<const double> x) {
  const double r = rms(x);
  if (r <= 0.0) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(r);
}

VoicingResult detect_voicing(const RawRecording& rec, const VoicingConfig& config) {
  if (!(config.frame_ms > 0.0)) throw std::invalid_argument("frame_ms must be positive");
  const std::span<const double> x(rec.samples);
  const std::size_t n = x.size();
  const auto frame = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.frame_ms * rec.sample_rate_hz / 1000.0)));
  const std::size_t frames = (n + frame - 1) / frame;

  std::vector<double> levels(frames);
  double loudest = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < frames; ++f) {
    const auto begin = f * frame;
    levels[f] = level_db(x.subspan(begin, std::min(frame, n - begin)));
    loudest = std::max(loudest, levels[f]);
  }
  const double threshold =
      config.relative_threshold ? loudest + config.level_threshold_db : config.level_threshold_db;

  // Runs of equal voicing state, in sample coordinates.
  struct Run {
    std::size_t start, end;
    bool voiced;
  };
  std::vector<Run> runs;
  for (std::size_t f = 0; f < frames; ++f) {
    const bool voiced = std::isfinite(levels[f]) && levels[f] >= threshold;
    const auto begin = f * frame;
    const auto end = std::min(n, begin + frame);
    if (!runs.empty() && runs.back().voiced == voiced) {
      runs.back().end = end;
    } else {
      runs.push_back({begin, end, voiced});
    }
  }
  // A trailing partial frame that is silent is absorbed into the voiced run before it.
  if (runs.size() >= 2 && !runs.back().voiced && runs.back().end - runs.back().start < frame) {
    runs[runs.size() - 2].end = runs.back().end;
    runs.pop_back();
  }

  VoicingResult out;
  const double rate = rec.sample_rate_hz;
  for (const auto& r : runs) {
    Region region{r.start, r.end, level_db(x.subspan(r.start, r.end - r.start))};
    if (r.voiced) {
      out.voiced.push_back(region);
      continue;
    }
    out.silent.push_back(region);
    const double seconds = static_cast<double>(r.end - r.start) / rate;
    if (seconds >= 3600.0) {
      ++out.silence.bin_counts[3];
    } else if (seconds >= 600.0) {
      ++out.silence.bin_counts[2];
    } else if (seconds >= 60.0) {
      ++out.silence.bin_counts[1];
    } else if (seconds >= 1.0) {
      ++out.silence.bin_counts[0];
    } else {
      ++out.silence.sub_second;
    }
  }
  return out;
}

LevelCalibration fit_calibration(std::span<const CalibrationPair> pairs) {
  if (pairs.empty()) return {};
  if (pairs.size() < 2) throw DataError("calibration needs at least two pairs");
  double mx = 0.0, my = 0.0;
  for (const auto& p : pairs) {
    if (!(p.rms > 0.0)) throw DataError("calibration RMS values must be positive");
    mx += std::log10(p.rms);
    my += p.db_spl;
  }
  const auto n = static_cast<double>(pairs.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pairs) {
    const double dx = std::log10(p.rms) - mx;
    sxx += dx * dx;
    sxy += dx * (p.db_spl - my);
  }
  if (!(sxx > 0.0)) throw DataError("degenerate calibration: all RMS values are equal");
  LevelCalibration cal;
  cal.slope = sxy / sxx;
  cal.intercept = my - cal.slope * mx;
  cal.identity = false;
  if (cal.slope == 0.0) throw DataError("degenerate calibration: zero slope");
  return cal;
}

double calibrate_sample(const LevelCalibration& cal, double x) {
  if (cal.identity || x == 0.0) return x;
  return std::copysign(std::pow(10.0, cal.intercept / 20.0) * std::pow(std::fabs(x), cal.slope / 20.0), x);
}

RawRecording scale_to_dbspl(const RawRecording& rec, std::span<const CalibrationPair> pairs) {
  if (rec.calibration.applied) throw std::invalid_argument("recording is already dbSPL-scaled");
  RawRecording out = rec;
  out.calibration = fit_calibration(pairs);
  out.calibration.applied = true;
  for (auto& s : out.samples) s = calibrate_sample(out.calibration, s);
  return out;
}

RawRecording unscale_from_dbspl(const RawRecording& rec) {
  RawRecording out = rec;
  out.calibration = LevelCalibration{};
  if (!rec.calibration.applied || rec.calibration.identity) return out;
  const double a = rec.calibration.intercept;
  const double b = rec.calibration.slope;
  for (auto& s : out.samples) {
    if (s == 0.0) continue;
    s = std::copysign(std::pow(10.0, (20.0 * std::log10(std::fabs(s)) - a) / b), s);
  }
  return out;
}

std::string_view to_string(NormalizationMode mode) {
  return mode == NormalizationMode::ZScore ? "zscore" : "dbspl";
}

NormalizationMode parse_normalization_mode(std::string_view text) {
  if (text == "zscore" || text == "ZScore") return NormalizationMode::ZScore;
  if (text == "dbspl" || text == "DbSplScaled") return NormalizationMode::DbSplScaled;
  throw DataError("unknown normalization mode '" + std::string(text) + "'");
}

NormalizedSegments normalize_segments(std::vector<PulseSegment> segments, NormalizationMode mode) {
  NormalizedSegments out;
  if (mode == NormalizationMode::DbSplScaled) {
    out.segments = std::move(segments);
    return out;
  }
  out.segments.reserve(segments.size());
  for (auto& seg : segments) {
    const auto n = static_cast<double>(seg.values.size());
    double mean = 0.0;
    double peak = 0.0;
    for (double v : seg.values) {
      mean += v;
      peak = std::max(peak, std::fabs(v));
    }
    mean /= n;
    double var = 0.0;
    for (double v : seg.values) var += (v - mean) * (v - mean);
    var /= n;
    const double sd = std::sqrt(var);
    if (seg.values.empty() || !(sd > 1e-12 * std::max(1.0, peak))) {
      ++out.dropped;
      continue;
    }
    for (auto& v : seg.values) v = (v - mean) / sd;
    out.segments.push_back(std::move(seg));
  }
  return out;
}

}  // namespace vocalsym
