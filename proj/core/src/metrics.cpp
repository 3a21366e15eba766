#include "q2t/metrics.hpp"

namespace q2t {

std::size_t filtered_rank(std::span<const double> scores, std::uint32_t answer,
                          std::span<const std::uint32_t> filter) {
  const double target = scores[answer];
  std::size_t above = 0;
  std::size_t f = 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    while (f < filter.size() && filter[f] < e) ++f;
    if (f < filter.size() && filter[f] == e) continue;
    if (e == answer) continue;
    if (scores[e] > target) ++above;
  }
  return above + 1;
}

void RankAccumulator::add(std::size_t rank) {
  reciprocal_sum += 1.0 / static_cast<double>(rank);
  if (rank <= 1) ++hits1;
  if (rank <= 3) ++hits3;
  if (rank <= 10) ++hits10;
  ++count;
}

}  // namespace q2t
