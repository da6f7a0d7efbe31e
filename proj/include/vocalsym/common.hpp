#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vocalsym {

using Series = std::vector<double>;

/// Raised for malformed or unusable input data (exit code 2 at the CLI).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ClassLabel { Control, PreTx, PostTx, Unlabeled };

std::string_view to_string(ClassLabel label);
ClassLabel parse_class_label(std::string_view text);

/// One subject-day: the unit that gets symbolized and clustered.
struct SubjectDayId {
  std::string subject;
  std::int64_t day = 0;
  ClassLabel label = ClassLabel::Unlabeled;

  /// "subject:day:label"
  std::string token() const;
  static SubjectDayId parse_token(std::string_view token);

  friend bool operator==(const SubjectDayId&, const SubjectDayId&) = default;
};

/// Mixes a master seed with a stream tag and indices (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace vocalsym
