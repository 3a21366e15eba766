#pragma once

#include "q2t/link_predictor.hpp"
#include "q2t/query_graphormer.hpp"

namespace q2t::fixtures {

// d1 = 16, L = 2, H = 2 encoder over a random ComplEx table of width 8.
graphormer::EncoderConfig tiny_config(encoding::EncodingMode mode = encoding::EncodingMode::kDirectedDistance);
kge::KgeModel tiny_kge(std::size_t num_entities = 30, std::size_t num_relations = 6);

// Random non-trivial parameters (biases, layer norms and bias tables too).
graphormer::EncoderParams perturbed_params(const graphormer::EncoderConfig& config,
                                           std::size_t kge_width, std::uint64_t seed);

}  // namespace q2t::fixtures
