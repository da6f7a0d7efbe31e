#include "vocalsym/common.hpp"

#include "vocalsym/io.hpp"

namespace vocalsym {

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::Control: return "Control";
    case ClassLabel::PreTx: return "PreTx";
    case ClassLabel::PostTx: return "PostTx";
    case ClassLabel::Unlabeled: return "Unlabeled";
  }
  return "Unlabeled";
}

ClassLabel parse_class_label(std::string_view text) {
  text = io::trim(text);
  if (text == "Control" || text == "Con" || text == "control") return ClassLabel::Control;
  if (text == "PreTx" || text == "pretx") return ClassLabel::PreTx;
  if (text == "PostTx" || text == "posttx") return ClassLabel::PostTx;
  if (text == "Unlabeled" || text.empty()) return ClassLabel::Unlabeled;
  throw DataError("unknown class label '" + std::string(text) + "'");
}

std::string SubjectDayId::token() const {
  return subject + ":" + std::to_string(day) + ":" + std::string(to_string(label));
}

SubjectDayId SubjectDayId::parse_token(std::string_view token) {
  auto parts = io::split(io::trim(token), ':');
  if (parts.size() < 2 || parts.size() > 3 || parts[0].empty()) {
    throw DataError("bad subject-day id '" + std::string(token) + "'");
  }
  SubjectDayId id;
  id.subject = std::string(parts[0]);
  id.day = io::parse_int(parts[1]);
  if (parts.size() == 3) id.label = parse_class_label(parts[2]);
  return id;
}

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t a,
                          std::uint64_t b) {
  // FNV-1a over the tag keeps stream names stable across builds.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return mix(mix(mix(master ^ h) ^ a) ^ (b * 0x9E3779B97F4A7C15ull + 1));
}

}  // namespace vocalsym
