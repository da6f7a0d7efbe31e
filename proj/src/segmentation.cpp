#include "vocalsym/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vocalsym/io.hpp"

namespace vocalsym {

PitchRange PitchRange::from_hz(double sample_rate_hz, double min_hz, double max_hz) {
  if (!(min_hz > 0.0) || !(max_hz > min_hz)) {
    throw std::invalid_argument("pitch range needs 0 < min_hz < max_hz");
  }
  return {sample_rate_hz / max_hz, sample_rate_hz / min_hz};
}

std::vector<double> peak_prominences(std::span<const double> x, std::span<const std::size_t> peaks) {
  const std::size_t n = x.size();
  // left_min[i]: min of x over (previous strictly higher sample, i]; right_min
  // mirrored. Monotonic stacks carry the running min of the span each entry covers.
  std::vector<double> left_min(n), right_min(n);
  struct Entry {
    std::size_t index;
    double span_min;
  };
  std::vector<Entry> stack;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = x[i];
    while (!stack.empty() && x[stack.back().index] <= x[i]) {
      acc = std::min(acc, stack.back().span_min);
      stack.pop_back();
    }
    left_min[i] = acc;
    stack.push_back({i, acc});
  }
  stack.clear();
  for (std::size_t k = n; k-- > 0;) {
    double acc = x[k];
    while (!stack.empty() && x[stack.back().index] <= x[k]) {
      acc = std::min(acc, stack.back().span_min);
      stack.pop_back();
    }
    right_min[k] = acc;
    stack.push_back({k, acc});
  }
  std::vector<double> out;
  out.reserve(peaks.size());
  for (auto p : peaks) out.push_back(x[p] - std::max(left_min[p], right_min[p]));
  return out;
}

std::vector<std::size_t> detect_peaks(std::span<const double> x, double min_prominence,
                                      std::size_t min_distance) {
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1]) maxima.push_back(i);
  }
  if (maxima.empty()) return maxima;

  const auto prom = peak_prominences(x, maxima);
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < maxima.size(); ++k) {
    if (prom[k] >= min_prominence) candidates.push_back(maxima[k]);
  }
  if (min_distance <= 1 || candidates.size() < 2) return candidates;

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[candidates[a]] > x[candidates[b]];
  });
  std::vector<char> keep(candidates.size(), 1);
  for (auto k : order) {
    if (!keep[k]) continue;
    const auto pos = candidates[k];
    for (std::size_t j = k; j-- > 0 && pos - candidates[j] < min_distance;) keep[j] = 0;
    for (std::size_t j = k + 1; j < candidates.size() && candidates[j] - pos < min_distance; ++j) {
      keep[j] = 0;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (keep[k]) out.push_back(candidates[k]);
  }
  return out;
}

namespace {
constexpr double kOctaveSlack = 0.1;
}  // namespace

PitchEstimate estimate_pitch(std::span<const double> region, PitchRange range) {
  if (!(range.min_period > 0.0) || !(range.max_period >= range.min_period)) {
    throw std::invalid_argument("invalid pitch range");
  }
  const std::size_t n = region.size();
  if (static_cast<double>(n) < 2.0 * range.max_period) {
    throw DataError("insufficient data for pitch");
  }
  const double mean = std::accumulate(region.begin(), region.end(), 0.0) / static_cast<double>(n);
  Series y(n);
  std::vector<double> energy(n + 1, 0.0);  // prefix sums of y^2
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = region[i] - mean;
    energy[i + 1] = energy[i] + y[i] * y[i];
  }
  const auto lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(range.min_period)));
  const auto hi = static_cast<std::size_t>(std::floor(range.max_period));

  auto acf = [&](std::size_t lag) {
    const std::size_t m = n - lag;
    double cross = 0.0;
    for (std::size_t t = 0; t < m; ++t) cross += y[t] * y[t + lag];
    const double head = energy[m];
    const double tail = energy[n] - energy[lag];
    const double denom = std::sqrt(head * tail);
    return denom > 0.0 ? cross / denom : 0.0;
  };

  std::vector<double> r(hi + 2, 0.0);
  double top = -2.0;
  for (std::size_t lag = lo; lag <= hi; ++lag) {
    r[lag] = acf(lag);
    top = std::max(top, r[lag]);
  }
  if (hi + 1 < n) r[hi + 1] = acf(hi + 1);
  // Multiples of the period score almost as high as the period itself, so
  // take the first local maximum close to the best score.
  std::size_t best = lo;
  for (std::size_t lag = lo; lag <= hi; ++lag) {
    const bool local = (lag == lo || r[lag] >= r[lag - 1]) && r[lag] >= r[lag + 1];
    if (local && r[lag] >= top - kOctaveSlack * std::fabs(top)) {
      best = lag;
      break;
    }
  }
  const double best_r = r[best];
  double period = static_cast<double>(best);
  if (best > lo && best < hi) {
    const double a = r[best - 1], b = r[best], c = r[best + 1];
    const double curvature = a - 2.0 * b + c;
    if (curvature < 0.0) {
      period += std::clamp(0.5 * (a - c) / curvature, -0.5, 0.5);
    }
  }
  period = std::clamp(period, range.min_period, range.max_period);
  return {period, range, best_r};
}

std::vector<std::size_t> correct_peaks(std::span<const double> region,
                                       std::span<const std::size_t> peaks,
                                       const PitchEstimate& pitch, double tolerance) {
  if (!(tolerance > 0.0 && tolerance < 1.0)) {
    throw std::invalid_argument("correction tolerance must lie in (0, 1)");
  }
  const double period = pitch.period_samples;
  if (!(period > 0.0)) throw std::invalid_argument("pitch period must be positive");
  const double min_gap = (1.0 - tolerance) * period;

  std::vector<std::size_t> kept;
  for (auto p : peaks) {
    if (!kept.empty() && static_cast<double>(p - kept.back()) < min_gap) continue;
    kept.push_back(p);
  }

  std::vector<std::size_t> out;
  out.reserve(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    out.push_back(kept[k]);
    if (k + 1 == kept.size()) break;
    const auto left = kept[k];
    const auto right = kept[k + 1];
    const double gap = static_cast<double>(right - left);
    if (gap <= (1.0 + tolerance) * period) continue;
    // Fill count: nearest whole number of periods, but never so many that the
    // nominal spacing drops under the minimum gap.
    const auto by_round = static_cast<long>(std::lround(gap / period)) - 1;
    const auto by_floor = static_cast<long>(std::floor(gap / min_gap)) - 1;
    const long fill = std::min(by_round, by_floor);
    if (fill < 1) continue;
    const double spacing = gap / static_cast<double>(fill + 1);
    const double half = std::clamp((spacing - min_gap) / 2.0, 0.0, period / 2.0);
    for (long j = 1; j <= fill; ++j) {
      const double nominal = static_cast<double>(left) + static_cast<double>(j) * spacing;
      auto lo = static_cast<std::size_t>(std::ceil(nominal - half));
      auto hi = static_cast<std::size_t>(std::floor(nominal + half));
      lo = std::max(lo, left + 1);
      hi = std::min(hi, right - 1);
      if (lo > hi) lo = hi = static_cast<std::size_t>(std::lround(nominal));
      std::size_t best = lo;
      for (auto i = lo + 1; i <= hi; ++i) {
        if (region[i] > region[best]) best = i;
      }
      out.push_back(best);
    }
  }
  return out;
}

std::vector<PulseSegment> segment_pulses(std::span<const double> region,
                                         std::span<const std::size_t> peaks,
                                         const std::string& subject_id, std::int64_t day_index,
                                         std::size_t offset) {
  std::vector<PulseSegment> out;
  if (peaks.size() < 2) return out;
  out.reserve(peaks.size() - 1);
  for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
    const auto a = peaks[i];
    const auto b = peaks[i + 1];
    if (b > region.size() || b < a + 2) continue;
    PulseSegment seg;
    seg.values.assign(region.begin() + static_cast<std::ptrdiff_t>(a),
                      region.begin() + static_cast<std::ptrdiff_t>(b));
    seg.subject_id = subject_id;
    seg.day_index = day_index;
    seg.start_sample = static_cast<std::int64_t>(offset + a);
    seg.raw_length = b - a;
    out.push_back(std::move(seg));
  }
  return out;
}

Series resample_linear(std::span<const double> x, std::size_t target) {
  if (target < 2) throw std::invalid_argument("target length must be at least 2");
  if (x.empty()) throw std::invalid_argument("cannot resample an empty sequence");
  if (x.size() == target) return Series(x.begin(), x.end());
  Series out(target);
  if (x.size() == 1) {
    std::fill(out.begin(), out.end(), x[0]);
    return out;
  }
  const double last = static_cast<double>(x.size() - 1);
  const double steps = static_cast<double>(target - 1);
  for (std::size_t j = 0; j < target; ++j) {
    const double pos = static_cast<double>(j) * last / steps;
    const auto i = std::min(static_cast<std::size_t>(pos), x.size() - 2);
    const double frac = pos - static_cast<double>(i);
    out[j] = frac == 0.0 ? x[i] : x[i] + frac * (x[i + 1] - x[i]);
  }
  out.back() = x.back();
  return out;
}

std::vector<PulseSegment> length_normalize(std::vector<PulseSegment> segments,
                                           std::optional<std::size_t> target,
                                           std::optional<std::size_t> cap) {
  if (segments.empty()) throw std::invalid_argument("length_normalize needs segments");
  std::size_t length = 0;
  if (target) {
    length = *target;
  } else {
    for (const auto& s : segments) length = std::max(length, s.values.size());
    if (cap) length = std::min(length, *cap);
  }
  if (length < 2) throw std::invalid_argument("target length must be at least 2");
  for (auto& s : segments) {
    if (s.values.size() != length) s.values = resample_linear(s.values, length);
  }
  return segments;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SegmentationResult segment_recording(const RawRecording& rec, const SegmentationConfig& config) {
  SegmentationResult result;
  result.voicing = detect_voicing(rec, config.voicing);
  const auto range = PitchRange::from_hz(rec.sample_rate_hz, config.min_pitch_hz, config.max_pitch_hz);
  const std::span<const double> signal(rec.samples);

  const auto& regions = result.voicing.voiced;
  std::vector<std::optional<PitchEstimate>> pitches(regions.size());
  std::vector<double> confident;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto slice = signal.subspan(regions[r].start_sample, regions[r].length());
    if (static_cast<double>(slice.size()) < 2.0 * range.max_period) continue;
    auto est = estimate_pitch(slice, range);
    if (!est.low_confidence()) {
      confident.push_back(est.period_samples);
      pitches[r] = est;
    }
  }
  std::optional<PitchEstimate> day_pitch;
  if (!confident.empty()) day_pitch = PitchEstimate{median(confident), range, 1.0};

  std::vector<PulseSegment> segments;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto slice = signal.subspan(regions[r].start_sample, regions[r].length());
    if (slice.size() < 3) continue;
    auto pitch = config.pitch_scope == PitchScope::PerDay ? day_pitch : pitches[r];
    if (!pitch) pitch = day_pitch;
    if (!pitch) ++result.regions_without_pitch;

    const auto [lo_it, hi_it] = std::minmax_element(slice.begin(), slice.end());
    const double prominence =
        std::max(config.min_prominence, config.min_prominence_relative * (*hi_it - *lo_it));
    const double period = pitch ? pitch->period_samples : range.min_period;
    const auto min_distance = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor((1.0 - config.correction_tolerance) * period)));

    auto peaks = detect_peaks(slice, prominence, min_distance);
    if (pitch) peaks = correct_peaks(slice, peaks, *pitch, config.correction_tolerance);
    auto pulses = segment_pulses(slice, peaks, rec.subject_id, rec.day_index, regions[r].start_sample);
    std::move(pulses.begin(), pulses.end(), std::back_inserter(segments));
  }
  if (segments.empty()) return result;

  // dbSPL mode on an unscaled recording: detection above ran on raw units,
  // the pointwise level map is applied to the pulse samples only.
  if (config.normalization == NormalizationMode::DbSplScaled && !rec.calibration.applied) {
    for (auto& seg : segments) {
      for (auto& v : seg.values) v = calibrate_sample(rec.calibration, v);
    }
  }
  segments = length_normalize(std::move(segments), config.target_length, config.max_target_length);
  auto normalized = normalize_segments(std::move(segments), config.normalization);
  result.segments = std::move(normalized.segments);
  result.dropped_constant = normalized.dropped;
  return result;
}

namespace {

constexpr std::string_view kDumpMagic = "VSSEGS01";

}  // namespace

void write_segment_dump(const std::filesystem::path& path, std::span<const PulseSegment> segments) {
  io::BinaryWriter w;
  w.raw(kDumpMagic);
  const std::size_t length = segments.empty() ? 0 : segments.front().values.size();
  w.u64(segments.size());
  w.u64(length);
  for (const auto& s : segments) {
    if (s.values.size() != length) throw std::invalid_argument("segment dump needs equal lengths");
    w.f64s(s.values);
  }
  for (const auto& s : segments) w.str(s.subject_id);
  for (const auto& s : segments) w.i64(s.day_index);
  for (const auto& s : segments) w.i64(s.start_sample);
  for (const auto& s : segments) w.u64(s.raw_length);
  io::write_text_file(path, w.bytes());
}

std::vector<PulseSegment> read_segment_dump(const std::filesystem::path& path) {
  const auto bytes = io::read_text_file(path);
  io::BinaryReader r(bytes);
  if (bytes.size() < kDumpMagic.size() || r.raw(kDumpMagic.size()) != kDumpMagic) {
    throw DataError(path.string() + ": not a segment dump");
  }
  const auto count = r.u64();
  const auto length = r.u64();
  if (count > bytes.size() || (length > 0 && count * length > bytes.size() / 8)) {
    throw DataError(path.string() + ": corrupt segment dump header");
  }
  std::vector<PulseSegment> out(count);
  for (auto& s : out) {
    s.values.resize(length);
    r.f64s(s.values);
  }
  for (auto& s : out) s.subject_id = r.str();
  for (auto& s : out) s.day_index = r.i64();
  for (auto& s : out) s.start_sample = r.i64();
  for (auto& s : out) s.raw_length = r.u64();
  if (!r.at_end()) throw DataError(path.string() + ": trailing bytes in segment dump");
  return out;
}

void write_segment_csv(const std::filesystem::path& path, std::span<const PulseSegment> segments) {
  std::string rows, index = "subject,day,start_sample,raw_length\n";
  for (const auto& s : segments) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (i) rows += ',';
      rows += io::format_double(s.values[i]);
    }
    rows += '\n';
    index += s.subject_id + ',' + std::to_string(s.day_index) + ',' +
             std::to_string(s.start_sample) + ',' + std::to_string(s.raw_length) + '\n';
  }
  io::write_text_file(path, rows);
  io::write_text_file(path.string() + ".index.csv", index);
}

std::vector<PulseSegment> read_segment_csv(const std::filesystem::path& path) {
  const auto rows = io::read_text_file(path);
  const auto index = io::read_text_file(path.string() + ".index.csv");
  std::vector<PulseSegment> out;
  for (auto line : io::split(rows, '\n')) {
    if (io::trim(line).empty()) continue;
    PulseSegment s;
    for (auto cell : io::split(line, ',')) s.values.push_back(io::parse_double(cell));
    out.push_back(std::move(s));
  }
  auto lines = io::split(index, '\n');
  std::size_t k = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    auto cells = io::split(io::trim(lines[i]), ',');
    if (cells.size() != 4 || k >= out.size()) throw DataError(path.string() + ": bad index sidecar");
    out[k].subject_id = std::string(cells[0]);
    out[k].day_index = io::parse_int(cells[1]);
    out[k].start_sample = io::parse_int(cells[2]);
    out[k].raw_length = static_cast<std::size_t>(io::parse_int(cells[3]));
    ++k;
  }
  if (k != out.size()) throw DataError(path.string() + ": index sidecar row count mismatch");
  return out;
}

}  // namespace vocalsym
