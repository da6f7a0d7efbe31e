#include "vocalsym/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "vocalsym/io.hpp"
#include "vocalsym/parallel.hpp"

namespace vocalsym {

using ordered_json = nlohmann::ordered_json;

std::vector<std::vector<SubjectDayId>> ClusterAssignment::members() const {
  std::vector<std::vector<SubjectDayId>> out(n);
  for (std::size_t i = 0; i < ids.size(); ++i) out.at(clusters[i]).push_back(ids[i]);
  return out;
}

ClusterAssignment assignment_from_dendrogram(const Dendrogram& dendrogram, std::vector<SubjectDayId> ids,
                                             std::size_t n) {
  if (ids.size() != dendrogram.leaf_count) throw std::invalid_argument("id count differs from leaf count");
  if (n < 1 || n > ids.size()) {
    throw DataError("cluster count " + std::to_string(n) + " outside [1, " + std::to_string(ids.size()) + "]");
  }
  auto cut = cut_to_clusters(dendrogram, n);
  return {cut.k, std::move(ids), std::move(cut.labels)};
}

ClusterAssignment cluster_subject_days(const DistanceMatrix& dm, std::size_t n) {
  if (n < 1 || n > dm.size()) {
    throw DataError("cluster count " + std::to_string(n) + " outside [1, " + std::to_string(dm.size()) + "]");
  }
  return assignment_from_dendrogram(ward_cluster(dm.condensed()), dm.ids, n);
}

namespace {

std::map<ClassLabel, std::size_t> count_labels(std::span<const SubjectDayId> members) {
  std::map<ClassLabel, std::size_t> counts;
  for (const auto& m : members) ++counts[m.label];
  return counts;
}

double dominant_ratio(const std::map<ClassLabel, std::size_t>& counts, std::size_t total) {
  if (total == 0) throw std::invalid_argument("concentration of an empty cluster");
  std::size_t best = 0;
  for (const auto& [label, c] : counts) best = std::max(best, c);
  return static_cast<double>(best) / static_cast<double>(total);
}

std::vector<SubjectDayId> unique_subjects(std::span<const SubjectDayId> members) {
  std::set<std::pair<std::string, ClassLabel>> seen;
  std::vector<SubjectDayId> out;
  for (const auto& m : members) {
    if (seen.insert({m.subject, m.label}).second) out.push_back(m);
  }
  return out;
}

}  // namespace

double class_concentration(std::span<const SubjectDayId> members) {
  return dominant_ratio(count_labels(members), members.size());
}

double subject_concentration(std::span<const SubjectDayId> members) {
  const auto unique = unique_subjects(members);
  return dominant_ratio(count_labels(unique), unique.size());
}

ClassLabel dominant_label(std::span<const SubjectDayId> members) {
  if (members.empty()) throw std::invalid_argument("dominant label of an empty cluster");
  const auto counts = count_labels(members);
  std::size_t best = 0;
  for (const auto& [label, c] : counts) best = std::max(best, c);
  std::optional<ClassLabel> pick;
  for (const auto& [label, c] : counts) {
    if (c == best && (!pick || to_string(label) < to_string(*pick))) pick = label;
  }
  return *pick;
}

double total_concentration(const ClusterAssignment& assignment, ConcentrationMetric metric) {
  const auto q = static_cast<double>(assignment.ids.size());
  if (q == 0) throw std::invalid_argument("total concentration of an empty assignment");
  // h_i * |c_i| is the dominant count for the class metric; summing counts
  // first and dividing once keeps pure clusterings at exactly 1.
  double weighted = 0.0;
  for (const auto& cluster : assignment.members()) {
    if (cluster.empty()) continue;
    if (metric == ConcentrationMetric::Class) {
      std::size_t best = 0;
      for (const auto& [label, c] : count_labels(cluster)) best = std::max(best, c);
      weighted += static_cast<double>(best);
    } else {
      weighted += subject_concentration(cluster) * static_cast<double>(cluster.size());
    }
  }
  return weighted / q;
}

ConcentrationReport summarize(const ClusterAssignment& assignment, std::string comparison) {
  ConcentrationReport report;
  report.comparison = std::move(comparison);
  report.n = assignment.n;
  report.subject_days = assignment.ids.size();
  for (const auto& cluster : assignment.members()) {
    ClusterSummary s;
    s.size = cluster.size();
    if (!cluster.empty()) {
      s.class_concentration = class_concentration(cluster);
      s.subject_concentration = subject_concentration(cluster);
      s.dominant = dominant_label(cluster);
      s.label_counts = count_labels(cluster);
    }
    report.per_cluster.push_back(std::move(s));
  }
  report.total_class_concentration = total_concentration(assignment, ConcentrationMetric::Class);
  report.total_subject_concentration = total_concentration(assignment, ConcentrationMetric::Subject);
  return report;
}

double ecdf(std::span<const double> samples, double x) {
  if (samples.empty()) throw std::invalid_argument("ECDF of no samples");
  const auto le = std::count_if(samples.begin(), samples.end(), [&](double s) { return s <= x; });
  return static_cast<double>(le) / static_cast<double>(samples.size());
}

double empirical_p_value(std::span<const double> samples, double observed) {
  return 1.0 - ecdf(samples, observed);
}

double inclusive_p_value(std::span<const double> samples, double observed) {
  if (samples.empty()) throw std::invalid_argument("p-value of no samples");
  const auto ge = std::count_if(samples.begin(), samples.end(), [&](double s) { return s >= observed; });
  return static_cast<double>(ge) / static_cast<double>(samples.size());
}

std::optional<double> significance_threshold(std::span<const double> samples, double alpha) {
  if (samples.empty()) throw std::invalid_argument("threshold of no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto t = static_cast<double>(sorted.size());
  // Walk distinct values upward; p is computed exactly as empirical_p_value does.
  for (std::size_t i = 0; i < sorted.size();) {
    const auto upper = static_cast<std::size_t>(
        std::upper_bound(sorted.begin() + static_cast<std::ptrdiff_t>(i), sorted.end(), sorted[i]) - sorted.begin());
    if (1.0 - static_cast<double>(upper) / t < alpha) return sorted[i];
    i = upper;
  }
  return std::nullopt;
}

CondensedMatrix random_distance_matrix(std::size_t size, double max_value, std::uint64_t seed) {
  if (!(max_value >= 0.0)) throw std::invalid_argument("RRDM maximum must be nonnegative");
  CondensedMatrix out(size);
  std::mt19937_64 rng(seed);
  for (auto& v : out.data()) {
    // 53 random bits mapped to [0, 1], spelled out so every platform draws the same values.
    v = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740991.0) * max_value;
  }
  return out;
}

std::vector<std::vector<double>> rrdm_samples(std::span<const SubjectDayId> ids, double max_value,
                                              std::span<const std::size_t> n_values, std::size_t trials,
                                              std::uint64_t seed, unsigned workers) {
  if (trials < 1) throw std::invalid_argument("RRDM needs at least one trial");
  for (auto n : n_values) {
    if (n < 1 || n > ids.size()) throw DataError("RRDM cluster count outside [1, Q]");
  }
  std::vector<std::vector<double>> samples(n_values.size(), std::vector<double>(trials));
  const std::vector<SubjectDayId> id_vec(ids.begin(), ids.end());
  parallel_for(trials, workers, [&](std::size_t t) {
    const auto dendrogram = ward_cluster(random_distance_matrix(ids.size(), max_value, derive_seed(seed, "rrdm", t)));
    for (std::size_t k = 0; k < n_values.size(); ++k) {
      samples[k][t] = total_concentration(assignment_from_dendrogram(dendrogram, id_vec, n_values[k]),
                                          ConcentrationMetric::Class);
    }
  });
  return samples;
}

namespace {

RrdmResult make_rrdm_result(std::vector<double> samples, double observed, std::uint64_t seed) {
  RrdmResult r;
  r.trials = samples.size();
  r.seed = seed;
  r.observed = observed;
  r.p_value = empirical_p_value(samples, observed);
  r.p_value_inclusive = inclusive_p_value(samples, observed);
  r.below_resolution = r.p_value == 0.0;
  r.samples = std::move(samples);
  return r;
}

}  // namespace

RrdmResult rrdm_significance(const DistanceMatrix& dm, std::size_t n, std::size_t trials, std::uint64_t seed,
                             unsigned workers) {
  const double observed = total_concentration(cluster_subject_days(dm, n), ConcentrationMetric::Class);
  const std::size_t ns[] = {n};
  auto samples = rrdm_samples(dm.ids, dm.max_value(), ns, trials, seed, workers);
  return make_rrdm_result(std::move(samples.front()), observed, seed);
}

DistanceMatrix select_labels(const DistanceMatrix& dm, std::span<const ClassLabel> labels) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < dm.size(); ++i) {
    if (std::find(labels.begin(), labels.end(), dm.ids[i].label) != labels.end()) rows.push_back(i);
  }
  return dm.subset(rows);
}

std::vector<Comparison> default_comparisons() {
  return {{"PreTx/Con", {ClassLabel::PreTx, ClassLabel::Control}},
          {"PostTx/Con", {ClassLabel::PostTx, ClassLabel::Control}}};
}

namespace {

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace

SweepResult sensitivity_sweep(const DistanceMatrix& dm, const SweepConfig& config) {
  if (config.n_values.empty()) throw std::invalid_argument("sweep needs at least one cluster count");
  for (std::size_t i = 1; i < config.n_values.size(); ++i) {
    if (config.n_values[i] <= config.n_values[i - 1]) throw std::invalid_argument("sweep counts must increase");
  }
  SweepResult result;
  result.rows.resize(config.n_values.size());
  for (std::size_t r = 0; r < config.n_values.size(); ++r) result.rows[r].n = config.n_values[r];

  std::vector<std::vector<std::vector<double>>> null_samples;  // [comparison][n][trial]
  for (std::size_t c = 0; c < config.comparisons.size(); ++c) {
    const auto& comp = config.comparisons[c];
    const auto sub = select_labels(dm, comp.labels);
    if (sub.size() < 2) throw DataError("comparison " + comp.name + " has fewer than two subject-days");
    if (config.n_values.back() > sub.size()) {
      throw DataError("comparison " + comp.name + " has fewer subject-days than the largest cluster count");
    }
    result.comparisons.push_back(comp.name);
    const auto dendrogram = ward_cluster(sub.condensed());
    auto samples = rrdm_samples(sub.ids, sub.max_value(), config.n_values, config.trials,
                                derive_seed(config.seed, comp.name), config.workers);
    for (std::size_t r = 0; r < config.n_values.size(); ++r) {
      SweepComparisonRow row;
      row.total_class_concentration = total_concentration(
          assignment_from_dendrogram(dendrogram, sub.ids, config.n_values[r]), ConcentrationMetric::Class);
      row.p_value = empirical_p_value(samples[r], row.total_class_concentration);
      row.threshold_p01 = significance_threshold(samples[r], 0.01);
      row.threshold_p05 = significance_threshold(samples[r], 0.05);
      result.rows[r].comparisons.push_back(row);
    }
    null_samples.push_back(std::move(samples));
  }

  auto index_of = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < result.comparisons.size(); ++c) {
      if (result.comparisons[c] == name) return c;
    }
    return std::nullopt;
  };
  const auto pre = index_of("PreTx/Con"), post = index_of("PostTx/Con");
  if (pre && post) {
    std::size_t best = 0;
    for (std::size_t r = 0; r < result.rows.size(); ++r) {
      auto& row = result.rows[r];
      row.d = row.comparisons[*pre].total_class_concentration - row.comparisons[*post].total_class_concentration;
      if (*row.d > *result.rows[best].d) best = r;
    }
    result.argmax_n = result.rows[best].n;
    std::vector<double> null_d(config.trials);
    for (std::size_t t = 0; t < config.trials; ++t) {
      null_d[t] = null_samples[*pre][best][t] - null_samples[*post][best][t];
    }
    const double half = 0.5 * (percentile(null_d, 0.975) - percentile(null_d, 0.025));
    result.half_width = half;
    for (const auto& row : result.rows) {
      if (*row.d >= *result.rows[best].d - half) {
        result.smallest_n_near_max = row.n;
        break;
      }
    }
    result.near_max_rule =
        "smallest n with d(n) >= max d - half-width of the central 95% range of null d at argmax n";
  }
  return result;
}

std::vector<ConcentrationReport> intra_subject_compare(const DistanceMatrix& dm, std::size_t n,
                                                       std::size_t trials, std::uint64_t seed,
                                                       unsigned workers) {
  std::vector<std::string> patients;
  for (const auto& id : dm.ids) {
    if ((id.label == ClassLabel::PreTx || id.label == ClassLabel::PostTx) &&
        std::find(patients.begin(), patients.end(), id.subject) == patients.end()) {
      patients.push_back(id.subject);
    }
  }
  std::sort(patients.begin(), patients.end());
  std::vector<ConcentrationReport> reports;
  for (const auto& patient : patients) {
    std::vector<std::size_t> rows;
    bool has_pre = false, has_post = false;
    for (std::size_t i = 0; i < dm.size(); ++i) {
      const auto& id = dm.ids[i];
      if (id.subject != patient) continue;
      if (id.label == ClassLabel::PreTx) has_pre = true;
      else if (id.label == ClassLabel::PostTx) has_post = true;
      else continue;
      rows.push_back(i);
    }
    if (!has_pre || !has_post) continue;
    if (rows.size() < std::max<std::size_t>(3, n)) {
      throw DataError("patient " + patient + " has too few days for an intra-subject comparison");
    }
    const auto sub = dm.subset(rows);
    auto report = summarize(cluster_subject_days(sub, n), patient);
    report.rrdm = rrdm_significance(sub, n, trials, derive_seed(seed, "intra:" + patient), workers);
    reports.push_back(std::move(report));
  }
  return reports;
}

namespace {

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json report_json(const ConcentrationReport& r) {
  ordered_json j;
  j["comparison"] = r.comparison;
  j["n"] = r.n;
  j["subject_days"] = r.subject_days;
  j["total_class_concentration"] = r.total_class_concentration;
  j["total_subject_concentration"] = r.total_subject_concentration;
  if (r.rrdm) {
    ordered_json s;
    s["trials"] = r.rrdm->trials;
    s["seed"] = r.rrdm->seed;
    s["p_value"] = r.rrdm->p_value;
    s["p_value_text"] = r.rrdm->below_resolution ? "< " + io::format_double(1.0 / static_cast<double>(r.rrdm->trials))
                                                 : io::format_double(r.rrdm->p_value);
    s["p_value_inclusive"] = r.rrdm->p_value_inclusive;
    s["ecdf_rule"] = "ECDF(x) = #{samples <= x} / trials; p = 1 - ECDF(observed); "
                     "p_value_inclusive = #{samples >= observed} / trials";
    j["rrdm"] = s;
  } else {
    j["rrdm"] = nullptr;
  }
  ordered_json clusters = ordered_json::array();
  for (const auto& c : r.per_cluster) {
    ordered_json cj;
    cj["size"] = c.size;
    cj["class_concentration"] = c.class_concentration;
    cj["subject_concentration"] = c.subject_concentration;
    cj["dominant_label"] = std::string(to_string(c.dominant));
    ordered_json counts;
    for (const auto& [label, n] : c.label_counts) counts[std::string(to_string(label))] = n;
    cj["label_counts"] = counts;
    clusters.push_back(cj);
  }
  j["clusters"] = clusters;
  return j;
}

std::string csv_number(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

}  // namespace

std::string concentration_json(std::span<const ConcentrationReport> reports) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  return arr.dump(2) + "\n";
}

std::string concentration_csv(std::span<const ConcentrationReport> reports) {
  std::string out =
      "comparison,n,subject_days,total_class_concentration,total_subject_concentration,p_value,p_value_inclusive,"
      "trials\n";
  for (const auto& r : reports) {
    out += r.comparison + "," + std::to_string(r.n) + "," + std::to_string(r.subject_days) + "," +
           io::format_double(r.total_class_concentration) + "," + io::format_double(r.total_subject_concentration) +
           "," + (r.rrdm ? io::format_double(r.rrdm->p_value) : "") + "," +
           (r.rrdm ? io::format_double(r.rrdm->p_value_inclusive) : "") + "," +
           (r.rrdm ? std::to_string(r.rrdm->trials) : "") + "\n";
  }
  return out;
}

std::string sweep_json(const SweepResult& sweep) {
  ordered_json j;
  j["comparisons"] = sweep.comparisons;
  ordered_json rows = ordered_json::array();
  for (const auto& row : sweep.rows) {
    ordered_json rj;
    rj["n"] = row.n;
    for (std::size_t c = 0; c < sweep.comparisons.size(); ++c) {
      const auto& cr = row.comparisons[c];
      ordered_json cj;
      cj["total_class_concentration"] = cr.total_class_concentration;
      cj["p_value"] = cr.p_value;
      cj["threshold_p01"] = optional_number(cr.threshold_p01);
      cj["threshold_p05"] = optional_number(cr.threshold_p05);
      rj[sweep.comparisons[c]] = cj;
    }
    rj["d"] = optional_number(row.d);
    rows.push_back(rj);
  }
  j["rows"] = rows;
  j["argmax_n"] = sweep.argmax_n ? ordered_json(*sweep.argmax_n) : ordered_json(nullptr);
  j["smallest_n_near_max"] = sweep.smallest_n_near_max ? ordered_json(*sweep.smallest_n_near_max) : ordered_json(nullptr);
  j["half_width"] = optional_number(sweep.half_width);
  j["near_max_rule"] = sweep.near_max_rule;
  return j.dump(2) + "\n";
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "n";
  for (const auto& name : sweep.comparisons) {
    out += "," + name + " concentration," + name + " p_value," + name + " threshold_p01," + name + " threshold_p05";
  }
  out += ",d\n";
  for (const auto& row : sweep.rows) {
    out += std::to_string(row.n);
    for (const auto& cr : row.comparisons) {
      out += "," + io::format_double(cr.total_class_concentration) + "," + io::format_double(cr.p_value) + "," +
             csv_number(cr.threshold_p01) + "," + csv_number(cr.threshold_p05);
    }
    out += "," + csv_number(row.d) + "\n";
  }
  return out;
}

std::string heatmap_csv(const ConcentrationReport& report) {
  std::set<ClassLabel> labels;
  for (const auto& c : report.per_cluster) {
    for (const auto& [label, n] : c.label_counts) labels.insert(label);
  }
  std::string out = "cluster";
  for (auto l : labels) out += "," + std::string(to_string(l));
  out += "\n";
  for (std::size_t i = 0; i < report.per_cluster.size(); ++i) {
    out += std::to_string(i);
    for (auto l : labels) {
      const auto& counts = report.per_cluster[i].label_counts;
      const auto it = counts.find(l);
      out += "," + std::to_string(it == counts.end() ? 0 : it->second);
    }
    out += "\n";
  }
  return out;
}

std::string ecdf_csv(std::span<const double> samples) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::string out = "concentration,ecdf\n";
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out += io::format_double(sorted[i]) + "," +
           io::format_double(static_cast<double>(i + 1) / static_cast<double>(sorted.size())) + "\n";
  }
  return out;
}

std::map<std::string, ClassLabel> read_label_csv(const std::filesystem::path& path) {
  std::map<std::string, ClassLabel> out;
  bool first = true;
  const auto text = io::read_text_file(path);
  for (auto line : io::split(text, '\n')) {
    line = io::trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto cells = io::split(line, ',');
    if (cells.size() != 2) throw DataError(path.string() + ": expected two columns per row");
    if (first) {
      first = false;
      if (io::trim(cells[0]) == "id") continue;
    }
    const auto id = SubjectDayId::parse_token(cells[0]);
    out[id.subject + ":" + std::to_string(id.day)] = parse_class_label(cells[1]);
  }
  return out;
}

void apply_labels(DistanceMatrix& dm, const std::map<std::string, ClassLabel>& labels) {
  for (auto& id : dm.ids) {
    const auto it = labels.find(id.subject + ":" + std::to_string(id.day));
    if (it == labels.end()) throw DataError("no label for subject-day " + id.subject + ":" + std::to_string(id.day));
    id.label = it->second;
  }
}

}  // namespace vocalsym
