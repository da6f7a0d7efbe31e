#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

#include "vocalsym/common.hpp"
#include "vocalsym/distance.hpp"

namespace vocalsym {

enum class MatrixKind { Mismatch, RRDM, Raw };

std::string_view to_string(MatrixKind kind);
MatrixKind parse_matrix_kind(std::string_view text);

/// Symmetric pairwise distances between subject-days.
struct DistanceMatrix {
  std::vector<SubjectDayId> ids;
  std::vector<double> values;  // row-major, ids.size()^2
  MatrixKind kind = MatrixKind::Raw;

  std::size_t size() const { return ids.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * ids.size() + j]; }
  double max_value() const;

  /// Throws DataError unless square, symmetric, nonnegative, zero diagonal.
  void validate() const;
  CondensedMatrix condensed() const;
  DistanceMatrix subset(const std::vector<std::size_t>& rows) const;
};

/// CSV: "# kind=<kind>" comment line, header row of id tokens, then rows.
void write_distance_csv(const std::filesystem::path& path, const DistanceMatrix& dm);
DistanceMatrix read_distance_csv(const std::filesystem::path& path);

/// Raw little-endian float64 values plus `<path>.ids` (kind line + one id per line).
void write_distance_binary(const std::filesystem::path& path, const DistanceMatrix& dm);
DistanceMatrix read_distance_binary(const std::filesystem::path& path);

}  // namespace vocalsym
