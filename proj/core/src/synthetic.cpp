#include "q2t/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <fmt/format.h>

#include "q2t/error.hpp"

namespace q2t::kg {

SplitFamily make_synthetic_family(const SyntheticSpec& spec) {
  const std::size_t capacity = spec.num_entities * spec.num_entities * spec.num_relations;
  if (spec.num_triples > capacity / 2) {
    throw Error(ErrorKind::kConfig,
                fmt::format("synthetic KG: {} triples is too dense for {}x{}", spec.num_triples,
                            spec.num_entities, spec.num_relations));
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<EntityId> entity(0, static_cast<EntityId>(spec.num_entities - 1));
  std::uniform_int_distribution<RelationId> relation(
      0, static_cast<RelationId>(spec.num_relations - 1));

  std::set<Triple> seen;
  std::vector<Triple> triples;
  while (triples.size() < spec.num_triples) {
    Triple t{entity(rng), relation(rng), entity(rng)};
    if (t.head == t.tail) continue;
    if (seen.insert(t).second) triples.push_back(t);
  }

  const auto n_valid = static_cast<std::size_t>(spec.valid_fraction * triples.size());
  const auto n_test = static_cast<std::size_t>(spec.test_fraction * triples.size());
  const auto n_train = triples.size() - n_valid - n_test;

  SplitFamily family;
  for (std::size_t i = 0; i < spec.num_entities; ++i) {
    family.vocabulary.entities.push_back(fmt::format("e{}", i));
  }
  for (std::size_t i = 0; i < spec.num_relations; ++i) {
    family.vocabulary.relations.push_back(fmt::format("r{}", i));
  }
  const auto ne = spec.num_entities;
  const auto nr = spec.num_relations;
  family.train = KnowledgeGraph(
      ne, nr, std::vector<Triple>(triples.begin(), triples.begin() + n_train), SplitLabel::kTrain);
  family.valid_edges = KnowledgeGraph(
      ne, nr, std::vector<Triple>(triples.begin() + n_train, triples.begin() + n_train + n_valid),
      SplitLabel::kTrainValid);
  family.test_edges = KnowledgeGraph(
      ne, nr, std::vector<Triple>(triples.begin() + n_train + n_valid, triples.end()),
      SplitLabel::kFull);
  const KnowledgeGraph tv[] = {family.train, family.valid_edges};
  family.train_valid = merge_graphs(tv, SplitLabel::kTrainValid);
  const KnowledgeGraph all[] = {family.train_valid, family.test_edges};
  family.full = merge_graphs(all, SplitLabel::kFull);
  return family;
}

}  // namespace q2t::kg
