#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "vocalsym/common.hpp"

namespace vocalsym {

/// One peak-to-peak pulse. `values` holds the raw samples until
/// length normalization, after which every pulse of a subject-day shares
/// one length; `raw_length` keeps the original sample count.
struct PulseSegment {
  Series values;
  std::string subject_id;
  std::int64_t day_index = 0;
  std::int64_t start_sample = 0;
  std::size_t raw_length = 0;
};

}  // namespace vocalsym
