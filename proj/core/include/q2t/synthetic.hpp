#pragma once

#include <cstdint>

#include "q2t/kg_store.hpp"

namespace q2t::kg {

struct SyntheticSpec {
  std::size_t num_entities = 100;
  std::size_t num_relations = 10;
  std::size_t num_triples = 1000;
  double valid_fraction = 0.0;
  double test_fraction = 0.0;
  std::uint64_t seed = 0;
};

// Uniformly random distinct triples, split into train/valid/test edges.
// Entity names are "e<id>", relation names "r<id>".
SplitFamily make_synthetic_family(const SyntheticSpec& spec);

}  // namespace q2t::kg
