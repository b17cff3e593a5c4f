#pragma once

#include <aggrisk/error.hpp>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace aggrisk {

// Half-open range of 1-based trial ids: [first, first + count).
struct TrialRange {
  std::uint32_t first = 1;
  std::uint32_t count = 0;

  std::uint32_t end() const noexcept { return first + count; }
  bool empty() const noexcept { return count == 0; }

  friend bool operator==(const TrialRange&, const TrialRange&) = default;
};

// Balanced contiguous split of trials 1..trial_count into chunk_count ranges.
// The first (trial_count % chunk_count) ranges get one extra trial; when
// chunk_count exceeds trial_count the trailing ranges are empty.
inline std::vector<TrialRange> split_trials(std::size_t trial_count, std::size_t chunk_count) {
  if (chunk_count == 0) throw PreconditionError("chunk count must be >= 1");
  std::vector<TrialRange> out;
  out.reserve(chunk_count);
  const std::size_t base = trial_count / chunk_count;
  const std::size_t extra = trial_count % chunk_count;
  std::size_t next = 1;
  for (std::size_t i = 0; i < chunk_count; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    out.push_back({static_cast<std::uint32_t>(next), static_cast<std::uint32_t>(size)});
    next += size;
  }
  return out;
}

}  // namespace aggrisk
