#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vocalsym/distance_matrix.hpp"
#include "vocalsym/symbolization.hpp"

namespace vocalsym {

struct ClusterAssignment {
  std::size_t n = 0;
  std::vector<SubjectDayId> ids;
  std::vector<std::size_t> clusters;  // parallel to ids, values in [0, n)

  std::vector<std::vector<SubjectDayId>> members() const;
};

/// Ward over the matrix, cut to exactly n clusters.
ClusterAssignment cluster_subject_days(const DistanceMatrix& dm, std::size_t n);
ClusterAssignment assignment_from_dendrogram(const Dendrogram& dendrogram, std::vector<SubjectDayId> ids,
                                             std::size_t n);

/// Dominant-label count over cluster size.
double class_concentration(std::span<const SubjectDayId> members);
/// Same ratio after collapsing repeated (subject, label) pairs.
double subject_concentration(std::span<const SubjectDayId> members);
/// Label with the highest count; ties go to the lexicographically first name.
ClassLabel dominant_label(std::span<const SubjectDayId> members);

enum class ConcentrationMetric { Class, Subject };

/// Sum over clusters of concentration * |c_i| / Q.
double total_concentration(const ClusterAssignment& assignment, ConcentrationMetric metric);

struct ClusterSummary {
  std::size_t size = 0;
  double class_concentration = 0.0;
  double subject_concentration = 0.0;
  ClassLabel dominant = ClassLabel::Unlabeled;
  std::map<ClassLabel, std::size_t> label_counts;
};

struct RrdmResult {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> samples;  // in trial order
  double observed = 0.0;
  double p_value = 1.0;
  /// Fraction of samples >= observed: ties count against significance.
  double p_value_inclusive = 1.0;
  /// Observed exceeds every sample: p is only known to be below 1/trials.
  bool below_resolution = false;
};

struct ConcentrationReport {
  std::string comparison;
  std::size_t n = 0;
  std::size_t subject_days = 0;
  std::vector<ClusterSummary> per_cluster;
  double total_class_concentration = 0.0;
  double total_subject_concentration = 0.0;
  std::optional<RrdmResult> rrdm;
};

ConcentrationReport summarize(const ClusterAssignment& assignment, std::string comparison = {});

/// Fraction of samples <= x.
double ecdf(std::span<const double> samples, double x);
/// 1 - ECDF(observed).
double empirical_p_value(std::span<const double> samples, double observed);
/// Fraction of samples >= observed.
double inclusive_p_value(std::span<const double> samples, double observed);
/// Smallest sample value whose p-value falls below alpha. With few trials this
/// is simply the sample maximum (p = 0); absent only when alpha <= 0.
std::optional<double> significance_threshold(std::span<const double> samples, double alpha);

/// Symmetric zero-diagonal matrix with i.i.d. U[0, max_value] upper triangle.
CondensedMatrix random_distance_matrix(std::size_t size, double max_value, std::uint64_t seed);

/// Total class concentration of Ward-clustered random matrices, one sample
/// per trial and per requested n (samples[n_index][trial]). Each trial
/// derives its own seed from (seed, trial) and reuses one dendrogram for
/// every n.
std::vector<std::vector<double>> rrdm_samples(std::span<const SubjectDayId> ids, double max_value,
                                              std::span<const std::size_t> n_values, std::size_t trials,
                                              std::uint64_t seed, unsigned workers);

RrdmResult rrdm_significance(const DistanceMatrix& dm, std::size_t n, std::size_t trials, std::uint64_t seed,
                             unsigned workers = 1);

/// Rows whose label is one of `labels`, in original order.
DistanceMatrix select_labels(const DistanceMatrix& dm, std::span<const ClassLabel> labels);

struct Comparison {
  std::string name;
  std::vector<ClassLabel> labels;
};
/// PreTx/Con and PostTx/Con.
std::vector<Comparison> default_comparisons();

struct SweepComparisonRow {
  double total_class_concentration = 0.0;
  double p_value = 1.0;
  std::optional<double> threshold_p01;
  std::optional<double> threshold_p05;
};

struct SweepRow {
  std::size_t n = 0;
  std::vector<SweepComparisonRow> comparisons;  // parallel to SweepResult::comparisons
  std::optional<double> d;                      // PreTx/Con minus PostTx/Con
};

struct SweepResult {
  std::vector<std::string> comparisons;
  std::vector<SweepRow> rows;
  std::optional<std::size_t> argmax_n;
  std::optional<std::size_t> smallest_n_near_max;
  std::optional<double> half_width;
  std::string near_max_rule;
};

struct SweepConfig {
  std::vector<std::size_t> n_values;
  std::size_t trials = 5000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::vector<Comparison> comparisons = default_comparisons();
};

SweepResult sensitivity_sweep(const DistanceMatrix& dm, const SweepConfig& config);

/// Per patient with both PreTx and PostTx days: cluster only that patient's
/// days into n groups and test with RRDM.
std::vector<ConcentrationReport> intra_subject_compare(const DistanceMatrix& dm, std::size_t n,
                                                       std::size_t trials, std::uint64_t seed,
                                                       unsigned workers = 1);

std::string concentration_json(std::span<const ConcentrationReport> reports);
std::string concentration_csv(std::span<const ConcentrationReport> reports);
std::string sweep_json(const SweepResult& sweep);
std::string sweep_csv(const SweepResult& sweep);
/// cluster x class count table.
std::string heatmap_csv(const ConcentrationReport& report);
std::string ecdf_csv(std::span<const double> samples);

/// "subject:day[:label]" tokens against labels; first column id, second label.
std::map<std::string, ClassLabel> read_label_csv(const std::filesystem::path& path);
/// Replaces the labels carried by the matrix ids (matched on subject:day).
void apply_labels(DistanceMatrix& dm, const std::map<std::string, ClassLabel>& labels);

}  // namespace vocalsym
