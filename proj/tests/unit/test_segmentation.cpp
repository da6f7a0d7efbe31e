#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <numeric>

#include "support.hpp"
#include "vocalsym/io.hpp"
#include "vocalsym/segmentation.hpp"

using namespace vocalsym;
using testsupport::TempDir;

namespace {

// Prominence from the definition: walk outward to the first strictly higher
// sample (or the edge), take the minimum on each side, use the higher base.
double prominence_naive(const Series& x, std::size_t p) {
  double left_min = x[p], right_min = x[p];
  for (std::size_t i = p; i-- > 0;) {
    if (x[i] > x[p]) break;
    left_min = std::min(left_min, x[i]);
  }
  for (std::size_t i = p + 1; i < x.size(); ++i) {
    if (x[i] > x[p]) break;
    right_min = std::min(right_min, x[i]);
  }
  return x[p] - std::max(left_min, right_min);
}

std::vector<std::size_t> peaks_naive(const Series& x, double min_prom, std::size_t min_distance) {
  std::vector<std::size_t> cand;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1] && prominence_naive(x, i) >= min_prom) cand.push_back(i);
  }
  std::vector<std::size_t> order = cand;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] > x[b]; });
  std::vector<std::size_t> kept;
  for (auto p : order) {
    bool ok = true;
    for (auto q : kept) ok = ok && (p > q ? p - q : q - p) >= min_distance;
    if (ok) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

// Narrow positive bump every `period` samples on a small negative floor.
Series pulse_train(std::size_t n, double period, double phase = 0.0) {
  Series x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = std::fmod(static_cast<double>(i) + phase, period) / period;
    const double d = std::min(u, 1.0 - u);
    x[i] = std::exp(-d * d / (2.0 * 0.05 * 0.05)) - 0.2 + 0.15 * std::sin(2.0 * std::numbers::pi * 2.0 * u);
  }
  return x;
}

}  // namespace

TEST_CASE("prominences match the definition on random series") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = testsupport::random_series(rng, 5 + trial % 60);
    std::vector<std::size_t> maxima;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
      if (x[i] > x[i - 1] && x[i] > x[i + 1]) maxima.push_back(i);
    }
    const auto prom = peak_prominences(x, maxima);
    REQUIRE(prom.size() == maxima.size());
    for (std::size_t k = 0; k < maxima.size(); ++k) CHECK(prom[k] == prominence_naive(x, maxima[k]));
  }
}

TEST_CASE("peak detection matches greedy brute force") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = testsupport::random_series(rng, 10 + trial % 80);
    const double prom = 0.5 * (trial % 5) / 4.0;
    const std::size_t dist = 1 + trial % 7;
    CHECK(detect_peaks(x, prom, dist) == peaks_naive(x, prom, dist));
  }
}

TEST_CASE("peak detection handles plateaus and equal heights") {
  const Series plateau = {0, 1, 1, 0, 2, 0};
  CHECK(detect_peaks(plateau, 0.0, 1) == std::vector<std::size_t>{4});
  const Series twins = {0, 1, 0, 1, 0};
  CHECK(detect_peaks(twins, 0.0, 3) == std::vector<std::size_t>{1});
  CHECK(detect_peaks(twins, 0.0, 2) == std::vector<std::size_t>{1, 3});
  CHECK(detect_peaks(Series{1.0, 2.0}, 0.0, 1).empty());
}

TEST_CASE("pitch estimation recovers integer and fractional periods") {
  const auto range = PitchRange::from_hz(8000.0, 70.0, 1000.0);
  CHECK(range.min_period == doctest::Approx(8.0));
  CHECK(range.max_period == doctest::Approx(8000.0 / 70.0));
  for (double period : {40.0, 46.24, 23.5, 80.0, 100.7}) {
    const auto est = estimate_pitch(pulse_train(4000, period, 3.0), range);
    CHECK(est.period_samples == doctest::Approx(period).epsilon(0.01));
    CHECK_FALSE(est.low_confidence());
  }
  std::mt19937_64 rng(5);
  auto x = pulse_train(4000, 37.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (auto& v : x) v += noise(rng);
  CHECK(estimate_pitch(x, range).period_samples == doctest::Approx(37.0).epsilon(0.02));
  CHECK_THROWS_AS(estimate_pitch(Series(100, 0.0), range), DataError);
}

TEST_CASE("white noise yields low pitch confidence") {
  std::mt19937_64 rng(8);
  const auto x = testsupport::random_series(rng, 8000);
  CHECK(estimate_pitch(x, PitchRange::from_hz(8000.0, 70.0, 1000.0)).low_confidence());
}

TEST_CASE("peak correction removes doubles and fills gaps") {
  const auto x = pulse_train(101, 25.0);  // maxima at 0, 25, 50, 75, 100
  PitchEstimate pitch{25.0, {}, 1.0};
  const std::vector<std::size_t> doubled = {0, 5, 25, 31, 50};
  CHECK(correct_peaks(x, doubled, pitch, 0.3) == std::vector<std::size_t>{0, 25, 50});
  const std::vector<std::size_t> missing = {0, 100};
  CHECK(correct_peaks(x, missing, pitch, 0.3) == std::vector<std::size_t>{0, 25, 50, 75, 100});
  const std::vector<std::size_t> fine = {0, 25, 50};
  CHECK(correct_peaks(x, fine, pitch, 0.3) == fine);
  CHECK_THROWS_AS(correct_peaks(x, fine, pitch, 1.5), std::invalid_argument);
}

TEST_CASE("corrected peak gaps stay within the tolerance bounds") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const double period = 10.0 + static_cast<double>(trial % 40);
    const double tol = 0.1 + 0.05 * (trial % 6);
    const auto x = testsupport::random_series(rng, 600);
    std::vector<std::size_t> peaks;
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    for (int k = 0; k < 4 + trial % 30; ++k) peaks.push_back(pick(rng));
    std::sort(peaks.begin(), peaks.end());
    peaks.erase(std::unique(peaks.begin(), peaks.end()), peaks.end());
    const auto out = correct_peaks(x, peaks, {period, {}, 1.0}, tol);
    REQUIRE(std::is_sorted(out.begin(), out.end()));
    CHECK(out.front() == peaks.front());
    for (std::size_t k = 1; k < out.size(); ++k) {
      const double gap = static_cast<double>(out[k] - out[k - 1]);
      CHECK(gap >= (1.0 - tol) * period - 1.0);
      CHECK(gap <= 2.0 * (1.0 + tol) * period);
    }
  }
}

TEST_CASE("pulses are half-open peak-to-peak spans") {
  const Series x = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::vector<std::size_t> peaks = {1, 4, 5, 9};
  const auto segs = segment_pulses(x, peaks, "S", 3, 100);
  REQUIRE(segs.size() == 2);  // the 1-sample span 4..5 is skipped
  CHECK(segs[0].values == Series{1, 2, 3});
  CHECK(segs[0].start_sample == 101);
  CHECK(segs[0].raw_length == 3);
  CHECK(segs[1].values == Series{5, 6, 7, 8});
  CHECK(segs[1].day_index == 3);
  CHECK(segment_pulses(x, std::vector<std::size_t>{2}, "S", 0).empty());
}

TEST_CASE("linear resampling is exact on lines and keeps endpoints") {
  std::mt19937_64 rng(2);
  for (std::size_t n = 2; n < 40; ++n) {
    for (std::size_t m : {2ul, 3ul, 7ul, 50ul, 101ul}) {
      Series line(n);
      for (std::size_t i = 0; i < n; ++i) line[i] = 1.0 + 2.0 * static_cast<double>(i);
      const auto out = resample_linear(line, m);
      REQUIRE(out.size() == m);
      for (std::size_t j = 0; j < m; ++j) {
        const double expected = 1.0 + 2.0 * static_cast<double>(j) * static_cast<double>(n - 1) / static_cast<double>(m - 1);
        CHECK(out[j] == doctest::Approx(expected).epsilon(1e-12));
      }
      const auto r = testsupport::random_series(rng, n);
      const auto rs = resample_linear(r, m);
      CHECK(rs.front() == r.front());
      CHECK(rs.back() == r.back());
      CHECK(*std::max_element(rs.begin(), rs.end()) <= *std::max_element(r.begin(), r.end()));
    }
  }
  CHECK_THROWS_AS(resample_linear(Series{1.0, 2.0}, 1), std::invalid_argument);
}

TEST_CASE("length normalization defaults to the longest pulse") {
  std::vector<PulseSegment> segs(3);
  segs[0].values = {0, 1};
  segs[1].values = {0, 1, 2, 3, 4};
  segs[2].values = {4, 3, 2};
  const auto out = length_normalize(segs);
  for (const auto& s : out) CHECK(s.values.size() == 5);
  CHECK(out[1].values == segs[1].values);
  CHECK(length_normalize(segs, std::nullopt, 4)[1].values.size() == 4);
  CHECK(length_normalize(segs, 8)[0].values.size() == 8);
}

TEST_CASE("segmenting a pulse train gives one pulse per period") {
  const double rate = 8000.0;
  const double period = 40.0;  // 200 Hz
  RawRecording rec;
  rec.sample_rate_hz = rate;
  rec.subject_id = "S";
  rec.day_index = 2;
  rec.samples.assign(4000, 0.0);
  auto voiced = pulse_train(8000, period, 7.0);
  for (auto& v : voiced) v *= 0.5;
  rec.samples.insert(rec.samples.end(), voiced.begin(), voiced.end());
  rec.samples.insert(rec.samples.end(), 4000, 0.0);

  const auto result = segment_recording(rec, {});
  REQUIRE(result.voicing.voiced.size() == 1);
  const double expected = static_cast<double>(result.voicing.voiced[0].length()) / period - 1.0;
  CHECK(std::fabs(static_cast<double>(result.segments.size()) - expected) <= 1.0);
  for (const auto& s : result.segments) {
    CHECK(s.values.size() == result.segments.front().values.size());
    CHECK(s.subject_id == "S");
    CHECK(s.day_index == 2);
    CHECK(std::abs(static_cast<double>(s.raw_length) - period) <= 1.0);
  }
  CHECK(result.regions_without_pitch == 0);
}

TEST_CASE("segment dumps and CSVs round-trip exactly") {
  TempDir dir("segdump");
  std::mt19937_64 rng(4);
  std::vector<PulseSegment> segs(6);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    segs[i].values = testsupport::random_series(rng, 17);
    segs[i].subject_id = "P0" + std::to_string(i % 2);
    segs[i].day_index = static_cast<std::int64_t>(i);
    segs[i].start_sample = static_cast<std::int64_t>(1000 * i);
    segs[i].raw_length = 30 + i;
  }
  write_segment_dump(dir / "a.bin", segs);
  write_segment_csv(dir / "a.csv", segs);
  for (const auto& back : {read_segment_dump(dir / "a.bin"), read_segment_csv(dir / "a.csv")}) {
    REQUIRE(back.size() == segs.size());
    for (std::size_t i = 0; i < segs.size(); ++i) {
      CHECK(back[i].values == segs[i].values);
      CHECK(back[i].subject_id == segs[i].subject_id);
      CHECK(back[i].day_index == segs[i].day_index);
      CHECK(back[i].start_sample == segs[i].start_sample);
      CHECK(back[i].raw_length == segs[i].raw_length);
    }
  }
  io::write_text_file(dir / "bad.bin", "VSSEGS01garbage");
  CHECK_THROWS_AS(read_segment_dump(dir / "bad.bin"), DataError);
}
