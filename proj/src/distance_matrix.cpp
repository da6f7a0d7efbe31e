#include "vocalsym/distance_matrix.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "vocalsym/io.hpp"

namespace vocalsym {

std::string_view to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::Mismatch: return "Mismatch";
    case MatrixKind::RRDM: return "RRDM";
    case MatrixKind::Raw: return "Raw";
  }
  return "Raw";
}

MatrixKind parse_matrix_kind(std::string_view text) {
  std::string lower(io::trim(text));
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "mismatch") return MatrixKind::Mismatch;
  if (lower == "rrdm") return MatrixKind::RRDM;
  if (lower == "raw") return MatrixKind::Raw;
  throw DataError("unknown matrix kind '" + std::string(text) + "'");
}

double DistanceMatrix::max_value() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

void DistanceMatrix::validate() const {
  const std::size_t n = ids.size();
  if (values.size() != n * n) throw DataError("distance matrix dimensions do not match ids");
  for (std::size_t i = 0; i < n; ++i) {
    if ((*this)(i, i) != 0.0) throw DataError("distance matrix diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = (*this)(i, j), b = (*this)(j, i);
      if (!(a >= 0.0) || !(b >= 0.0)) throw DataError("distance matrix has negative or NaN entries");
      if (std::fabs(a - b) > 1e-12 * std::max({1.0, a, b})) {
        throw DataError("distance matrix is not symmetric");
      }
    }
  }
}

CondensedMatrix DistanceMatrix::condensed() const {
  validate();
  CondensedMatrix out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) out.set(i, j, (*this)(i, j));
  }
  return out;
}

DistanceMatrix DistanceMatrix::subset(const std::vector<std::size_t>& rows) const {
  DistanceMatrix out;
  out.kind = kind;
  for (auto r : rows) out.ids.push_back(ids.at(r));
  out.values.resize(rows.size() * rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) out.at(i, j) = (*this)(rows[i], rows[j]);
  }
  return out;
}

void write_distance_csv(const std::filesystem::path& path, const DistanceMatrix& dm) {
  std::string text = "# kind=" + std::string(to_string(dm.kind)) + "\n";
  for (std::size_t i = 0; i < dm.size(); ++i) {
    if (i) text += ',';
    text += dm.ids[i].token();
  }
  text += '\n';
  for (std::size_t i = 0; i < dm.size(); ++i) {
    for (std::size_t j = 0; j < dm.size(); ++j) {
      if (j) text += ',';
      text += io::format_double(dm(i, j));
    }
    text += '\n';
  }
  io::write_text_file(path, text);
}

DistanceMatrix read_distance_csv(const std::filesystem::path& path) {
  const auto text = io::read_text_file(path);
  DistanceMatrix dm;
  bool header_done = false;
  for (auto line : io::split(text, '\n')) {
    line = io::trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto pos = line.find("kind=");
      if (pos != std::string_view::npos) dm.kind = parse_matrix_kind(line.substr(pos + 5));
      continue;
    }
    if (!header_done) {
      for (auto cell : io::split(line, ',')) dm.ids.push_back(SubjectDayId::parse_token(cell));
      header_done = true;
      continue;
    }
    auto cells = io::split(line, ',');
    if (cells.size() != dm.ids.size()) throw DataError(path.string() + ": ragged distance row");
    for (auto cell : cells) dm.values.push_back(io::parse_double(cell));
  }
  if (dm.values.size() != dm.ids.size() * dm.ids.size()) {
    throw DataError(path.string() + ": distance matrix is not square");
  }
  dm.validate();
  return dm;
}

void write_distance_binary(const std::filesystem::path& path, const DistanceMatrix& dm) {
  io::BinaryWriter w;
  w.f64s(dm.values);
  io::write_text_file(path, w.bytes());
  std::string ids = "# kind=" + std::string(to_string(dm.kind)) + "\n";
  for (const auto& id : dm.ids) ids += id.token() + "\n";
  io::write_text_file(path.string() + ".ids", ids);
}

DistanceMatrix read_distance_binary(const std::filesystem::path& path) {
  DistanceMatrix dm;
  const auto ids = io::read_text_file(path.string() + ".ids");
  for (auto line : io::split(ids, '\n')) {
    line = io::trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto pos = line.find("kind=");
      if (pos != std::string_view::npos) dm.kind = parse_matrix_kind(line.substr(pos + 5));
      continue;
    }
    dm.ids.push_back(SubjectDayId::parse_token(line));
  }
  const auto bytes = io::read_text_file(path);
  if (bytes.size() != dm.ids.size() * dm.ids.size() * 8) {
    throw DataError(path.string() + ": size does not match the id sidecar");
  }
  dm.values.resize(dm.ids.size() * dm.ids.size());
  io::BinaryReader r(bytes);
  r.f64s(dm.values);
  dm.validate();
  return dm;
}

}  // namespace vocalsym
