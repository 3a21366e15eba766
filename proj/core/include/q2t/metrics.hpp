#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace q2t {

// Filtered rank of `answer`: 1 + the number of entities outside `filter`
// that score strictly higher. `filter` is sorted and normally contains
// `answer`; ties resolve in the answer's favour.
std::size_t filtered_rank(std::span<const double> scores, std::uint32_t answer,
                          std::span<const std::uint32_t> filter);

struct RankAccumulator {
  double reciprocal_sum = 0.0;
  std::size_t hits1 = 0;
  std::size_t hits3 = 0;
  std::size_t hits10 = 0;
  std::size_t count = 0;

  void add(std::size_t rank);
  double mrr() const { return count ? reciprocal_sum / static_cast<double>(count) : 0.0; }
  double hit_rate(std::size_t hits) const {
    return count ? static_cast<double>(hits) / static_cast<double>(count) : 0.0;
  }
};

}  // namespace q2t
