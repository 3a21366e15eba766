#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "q2t/kg_store.hpp"
#include "q2t/query_ir.hpp"

namespace q2t::symbolic {

using kg::EntityId;
using query::QueryType;

// Sorted, duplicate-free entity ids.
using AnswerSet = std::vector<EntityId>;

// Exact set-algebra evaluation in topological order, with existential
// variables and atom-level negation: a negated edge out of node set S admits
// x when some s in S has no such edge to x. For a singleton S this is the
// complement of the projection over all entities.
AnswerSet answer_conjunctive(const query::ConjunctiveGraph& graph, const kg::GraphIndex& index);
AnswerSet answer_dnf(const query::DNFQuery& query, const kg::GraphIndex& index);

// Direct evaluation of an operator tree, unions included. Negation
// complements the whole branch set, so this differs from answer_dnf when a
// negated branch ends in a multi-entity projection (pni).
AnswerSet answer_expression(const query::QueryExpr& expr, const query::TemplateBinding& binding,
                            const kg::GraphIndex& index);

// Enumerates every assignment of the graph's variables; an independent
// check on answer_conjunctive. Refuses graphs with more than four variables.
AnswerSet brute_force_answers(const query::ConjunctiveGraph& graph, const kg::KnowledgeGraph& kg);
AnswerSet brute_force_answers(const query::DNFQuery& query, const kg::KnowledgeGraph& kg);

inline constexpr std::size_t kBruteForceMaxVariables = 4;

struct EasyHard {
  AnswerSet easy;
  AnswerSet hard;
};

// easy = answers on `observed`; hard = answers on `full` that are not easy.
EasyHard hard_answers(const query::DNFQuery& query, const kg::GraphIndex& observed,
                      const kg::GraphIndex& full);

struct SamplerConfig {
  // Rejection budget for each negated branch.
  std::size_t negation_attempts = 100;
  // Restarts (fresh target entity) before sample_query gives up.
  std::size_t max_attempts = 1000;
  // generate_dataset draws at most count * this many candidates per type.
  std::size_t record_attempt_factor = 50;
};

// Instantiates a template by walking backwards from a uniformly drawn target
// entity; the target is always an answer of the returned query.
query::DNFQuery sample_query(QueryType type, const kg::GraphIndex& index, std::mt19937_64& rng,
                             const SamplerConfig& config = {});
query::DNFQuery sample_query(QueryType type, const kg::KnowledgeGraph& kg, std::mt19937_64& rng,
                             const SamplerConfig& config = {});

struct QueryRecord {
  query::DNFQuery query;
  AnswerSet easy_answers;
  AnswerSet hard_answers;

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

struct SampledDataset {
  std::vector<QueryRecord> records;

  std::map<QueryType, std::size_t> counts() const;
  friend bool operator==(const SampledDataset&, const SampledDataset&) = default;
};

struct DatasetSplits {
  SampledDataset train;
  SampledDataset valid;
  SampledDataset test;
};

struct GenerationCounts {
  std::map<QueryType, std::size_t> train;
  std::map<QueryType, std::size_t> valid;
  std::map<QueryType, std::size_t> test;
};

// Training queries are sampled and answered on the train graph (answers
// stored as easy). Valid/test queries are sampled on train+valid / full and
// kept only when they have at least one hard answer. Each (split, type) pair
// draws from its own generator seeded by (seed, split, type), and records
// are sorted canonically.
DatasetSplits generate_dataset(const kg::SplitFamily& family, const GenerationCounts& counts,
                               std::uint64_t seed, const SamplerConfig& config = {});

// Stable record order: template order, then nested-tuple form.
void sort_canonically(SampledDataset& dataset);

// Mean answer-set size per type (hard answers, or easy when no record has
// hard answers).
std::map<QueryType, double> average_answer_counts(const SampledDataset& dataset);

}  // namespace q2t::symbolic
