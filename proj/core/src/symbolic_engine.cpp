#include "q2t/symbolic_engine.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "q2t/error.hpp"

namespace q2t::symbolic {

using query::ConjunctiveGraph;
using query::DNFQuery;
using query::NodeKind;
using query::QueryExpr;
using query::TemplateBinding;

namespace {

using Bitmap = std::vector<char>;

Bitmap project(const Bitmap& from, kg::RelationId relation, const kg::GraphIndex& index) {
  Bitmap out(from.size(), 0);
  for (std::size_t h = 0; h < from.size(); ++h) {
    if (!from[h]) continue;
    for (auto t : index.tails(static_cast<EntityId>(h), relation)) out[t] = 1;
  }
  return out;
}

AnswerSet to_answer_set(const Bitmap& bits) {
  AnswerSet out;
  for (std::size_t e = 0; e < bits.size(); ++e) {
    if (bits[e]) out.push_back(static_cast<EntityId>(e));
  }
  return out;
}

AnswerSet set_union(const AnswerSet& a, const AnswerSet& b) {
  AnswerSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

AnswerSet set_difference(const AnswerSet& a, const AnswerSet& b) {
  AnswerSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

Bitmap evaluate(const QueryExpr& expr, const TemplateBinding& binding,
                const kg::GraphIndex& index) {
  const auto n = index.num_entities();
  switch (expr.op) {
    case QueryExpr::Op::kAnchor: {
      Bitmap out(n, 0);
      out.at(binding.anchors.at(expr.slot)) = 1;
      return out;
    }
    case QueryExpr::Op::kProject:
      return project(evaluate(expr.children.at(0), binding, index),
                     binding.relations.at(expr.slot), index);
    case QueryExpr::Op::kNegate: {
      auto out = evaluate(expr.children.at(0), binding, index);
      for (auto& bit : out) bit = !bit;
      return out;
    }
    case QueryExpr::Op::kIntersect: {
      Bitmap out(n, 1);
      for (const auto& child : expr.children) {
        const auto part = evaluate(child, binding, index);
        for (std::size_t e = 0; e < n; ++e) out[e] = out[e] && part[e];
      }
      return out;
    }
    case QueryExpr::Op::kUnion: {
      Bitmap out(n, 0);
      for (const auto& child : expr.children) {
        const auto part = evaluate(child, binding, index);
        for (std::size_t e = 0; e < n; ++e) out[e] = out[e] || part[e];
      }
      return out;
    }
  }
  return {};
}

std::string signature(const QueryExpr& expr, const TemplateBinding& binding) {
  switch (expr.op) {
    case QueryExpr::Op::kAnchor: return fmt::format("e{}", binding.anchors[expr.slot]);
    case QueryExpr::Op::kProject:
      return fmt::format("p({},{})", signature(expr.children[0], binding),
                         binding.relations[expr.slot]);
    case QueryExpr::Op::kNegate: return "n(" + signature(expr.children[0], binding) + ")";
    case QueryExpr::Op::kIntersect:
    case QueryExpr::Op::kUnion: {
      std::string out = expr.op == QueryExpr::Op::kUnion ? "u(" : "i(";
      for (const auto& c : expr.children) out += signature(c, binding) + ",";
      return out + ")";
    }
  }
  return {};
}

class Sampler {
 public:
  Sampler(const kg::GraphIndex& index, std::mt19937_64& rng, const SamplerConfig& config)
      : index_(index), rng_(rng), config_(config) {}

  bool fill(const QueryExpr& expr, EntityId target, TemplateBinding& binding) {
    switch (expr.op) {
      case QueryExpr::Op::kAnchor:
        binding.anchors[expr.slot] = target;
        return true;
      case QueryExpr::Op::kProject: {
        const auto incoming = index_.incoming(target);
        if (incoming.empty()) return false;
        std::uniform_int_distribution<std::size_t> pick(0, incoming.size() - 1);
        const auto [relation, head] = incoming[pick(rng_)];
        binding.relations[expr.slot] = relation;
        return fill(expr.children[0], head, binding);
      }
      case QueryExpr::Op::kNegate:
        return fill_negated(expr.children[0], target, binding);
      case QueryExpr::Op::kIntersect:
      case QueryExpr::Op::kUnion: {
        std::set<std::string> seen;
        for (const auto& child : expr.children) {
          if (!fill(child, target, binding)) return false;
          // Coinciding branches make the query degenerate; resample.
          if (!seen.insert(signature(child, binding)).second) return false;
        }
        return true;
      }
    }
    return false;
  }

  EntityId random_entity() {
    std::uniform_int_distribution<std::size_t> pick(0, index_.num_entities() - 1);
    return static_cast<EntityId>(pick(rng_));
  }

 private:
  // Chooses a branch whose answers exclude `target`.
  bool fill_negated(const QueryExpr& branch, EntityId target, TemplateBinding& binding) {
    for (std::size_t attempt = 0; attempt < config_.negation_attempts; ++attempt) {
      if (!fill(branch, random_entity(), binding)) continue;
      const auto covered = evaluate(branch, binding, index_);
      if (!covered[target]) return true;
    }
    return false;
  }

  const kg::GraphIndex& index_;
  std::mt19937_64& rng_;
  const SamplerConfig& config_;
};

std::size_t type_order(QueryType type) {
  for (std::size_t i = 0; i < query::kAllTemplates.size(); ++i) {
    if (query::kAllTemplates[i] == type) return i;
  }
  return query::kAllTemplates.size();
}

}  // namespace

AnswerSet answer_conjunctive(const ConjunctiveGraph& graph, const kg::GraphIndex& index) {
  const auto n = index.num_entities();
  const auto layers = query::topological_layers(graph);
  std::vector<query::NodeId> order(graph.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<query::NodeId>(i);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return layers.layer[a] < layers.layer[b];
  });

  std::vector<Bitmap> sets(graph.nodes.size());
  for (auto v : order) {
    const auto& node = graph.nodes[v];
    if (node.kind == NodeKind::kAnchor) {
      sets[v].assign(n, 0);
      sets[v].at(node.entity) = 1;
      continue;
    }
    Bitmap current(n, 1);
    for (const auto& e : graph.edges) {
      if (e.dst != v) continue;
      if (!e.negated) {
        const auto reached = project(sets[e.src], e.relation, index);
        for (std::size_t x = 0; x < n; ++x) current[x] = current[x] && reached[x];
        continue;
      }
      // x qualifies when some source lacks the edge to it
      std::vector<std::size_t> hits(n, 0);
      std::size_t sources = 0;
      for (std::size_t s = 0; s < n; ++s) {
        if (!sets[e.src][s]) continue;
        ++sources;
        for (auto t : index.tails(static_cast<EntityId>(s), e.relation)) ++hits[t];
      }
      for (std::size_t x = 0; x < n; ++x) current[x] = current[x] && hits[x] < sources;
    }
    sets[v] = std::move(current);
  }
  return to_answer_set(sets[graph.free_var()]);
}

AnswerSet answer_dnf(const DNFQuery& query, const kg::GraphIndex& index) {
  AnswerSet out;
  for (const auto& conjunct : query.conjuncts) out = set_union(out, answer_conjunctive(conjunct, index));
  return out;
}

AnswerSet answer_expression(const QueryExpr& expr, const TemplateBinding& binding,
                            const kg::GraphIndex& index) {
  return to_answer_set(evaluate(expr, binding, index));
}

AnswerSet brute_force_answers(const ConjunctiveGraph& graph, const kg::KnowledgeGraph& kg) {
  std::vector<query::NodeId> variables;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (graph.nodes[i].kind != NodeKind::kAnchor) variables.push_back(static_cast<query::NodeId>(i));
  }
  if (variables.size() > kBruteForceMaxVariables) {
    throw Error(ErrorKind::kUnsupportedQuery,
                fmt::format("brute force refuses {} variables (max {})", variables.size(),
                            kBruteForceMaxVariables));
  }
  const auto n = kg.num_entities();
  if (n == 0) return {};
  const auto free = graph.free_var();

  std::vector<EntityId> value(graph.nodes.size(), 0);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (graph.nodes[i].kind == NodeKind::kAnchor) value[i] = graph.nodes[i].entity;
  }
  std::vector<std::size_t> digits(variables.size(), 0);
  std::set<EntityId> answers;
  while (true) {
    for (std::size_t k = 0; k < variables.size(); ++k) {
      value[variables[k]] = static_cast<EntityId>(digits[k]);
    }
    bool satisfied = true;
    for (const auto& e : graph.edges) {
      const bool present = kg.contains({value[e.src], e.relation, value[e.dst]});
      if (present == e.negated) {
        satisfied = false;
        break;
      }
    }
    if (satisfied) answers.insert(value[free]);

    std::size_t k = 0;
    while (k < digits.size() && ++digits[k] == n) digits[k++] = 0;
    if (k == digits.size()) break;
  }
  return {answers.begin(), answers.end()};
}

AnswerSet brute_force_answers(const DNFQuery& query, const kg::KnowledgeGraph& kg) {
  AnswerSet out;
  for (const auto& conjunct : query.conjuncts) out = set_union(out, brute_force_answers(conjunct, kg));
  return out;
}

EasyHard hard_answers(const DNFQuery& query, const kg::GraphIndex& observed,
                      const kg::GraphIndex& full) {
  EasyHard result;
  result.easy = answer_dnf(query, observed);
  result.hard = set_difference(answer_dnf(query, full), result.easy);
  return result;
}

DNFQuery sample_query(QueryType type, const kg::GraphIndex& index, std::mt19937_64& rng,
                      const SamplerConfig& config) {
  if (index.num_entities() == 0) {
    throw Error(ErrorKind::kSampling, "cannot sample queries from an empty graph");
  }
  const auto expr = query::template_expression(type);
  const auto arity = query::template_arity(type);
  Sampler sampler(index, rng, config);
  for (std::size_t attempt = 0; attempt < config.max_attempts; ++attempt) {
    TemplateBinding binding{std::vector<EntityId>(arity.anchors, 0),
                            std::vector<kg::RelationId>(arity.relations, 0)};
    if (sampler.fill(expr, sampler.random_entity(), binding)) {
      return query::to_dnf(expr, binding, type);
    }
  }
  throw Error(ErrorKind::kSampling,
              fmt::format("could not sample a {} query after {} attempts",
                          query::query_type_name(type), config.max_attempts));
}

DNFQuery sample_query(QueryType type, const kg::KnowledgeGraph& kg, std::mt19937_64& rng,
                      const SamplerConfig& config) {
  return sample_query(type, kg::GraphIndex(kg), rng, config);
}

std::map<QueryType, std::size_t> SampledDataset::counts() const {
  std::map<QueryType, std::size_t> out;
  for (const auto& r : records) ++out[r.query.type];
  return out;
}

void sort_canonically(SampledDataset& dataset) {
  std::vector<std::pair<std::pair<std::size_t, std::string>, QueryRecord>> keyed;
  keyed.reserve(dataset.records.size());
  for (auto& r : dataset.records) {
    auto form = r.query.type == QueryType::kCustom ? std::string() : query::serialize_nested(r.query);
    keyed.push_back({{type_order(r.query.type), std::move(form)}, std::move(r)});
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  dataset.records.clear();
  for (auto& [key, record] : keyed) dataset.records.push_back(std::move(record));
}

DatasetSplits generate_dataset(const kg::SplitFamily& family, const GenerationCounts& counts,
                               std::uint64_t seed, const SamplerConfig& config) {
  const kg::GraphIndex train(family.train);
  const kg::GraphIndex train_valid(family.train_valid);
  const kg::GraphIndex full(family.full);

  struct SplitPlan {
    std::size_t id;
    const std::map<QueryType, std::size_t>* counts;
    const kg::GraphIndex* sample_on;
    const kg::GraphIndex* observed;  // nullptr for the training split
    SampledDataset* out;
  };
  DatasetSplits splits;
  const SplitPlan plans[] = {
      {0, &counts.train, &train, nullptr, &splits.train},
      {1, &counts.valid, &train_valid, &train, &splits.valid},
      {2, &counts.test, &full, &train_valid, &splits.test},
  };

  for (const auto& plan : plans) {
    for (const auto& [type, wanted] : *plan.counts) {
      if (wanted == 0) continue;
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(plan.id),
                        static_cast<std::uint32_t>(type_order(type))};
      std::mt19937_64 rng(seq);
      std::set<std::string> forms;
      const auto budget = wanted * config.record_attempt_factor;
      std::size_t produced = 0;
      for (std::size_t attempt = 0; attempt < budget && produced < wanted; ++attempt) {
        auto q = sample_query(type, *plan.sample_on, rng, config);
        if (!forms.insert(query::serialize_nested(q)).second) continue;
        QueryRecord record;
        if (plan.observed == nullptr) {
          record.easy_answers = answer_dnf(q, *plan.sample_on);
        } else {
          auto split = hard_answers(q, *plan.observed, *plan.sample_on);
          if (split.hard.empty()) continue;
          record.easy_answers = std::move(split.easy);
          record.hard_answers = std::move(split.hard);
        }
        record.query = std::move(q);
        plan.out->records.push_back(std::move(record));
        ++produced;
      }
      if (produced < wanted) {
        throw Error(ErrorKind::kSampling,
                    fmt::format("split {}: only {} of {} {} queries after {} attempts", plan.id,
                                produced, wanted, query::query_type_name(type), budget));
      }
    }
    sort_canonically(*plan.out);
  }
  return splits;
}

std::map<QueryType, double> average_answer_counts(const SampledDataset& dataset) {
  std::map<QueryType, std::pair<double, std::size_t>> sums;
  const bool use_hard = std::any_of(dataset.records.begin(), dataset.records.end(),
                                    [](const QueryRecord& r) { return !r.hard_answers.empty(); });
  for (const auto& r : dataset.records) {
    auto& [total, count] = sums[r.query.type];
    total += static_cast<double>(use_hard ? r.hard_answers.size() : r.easy_answers.size());
    ++count;
  }
  std::map<QueryType, double> out;
  for (const auto& [type, sc] : sums) out[type] = sc.first / static_cast<double>(sc.second);
  return out;
}

}  // namespace q2t::symbolic
