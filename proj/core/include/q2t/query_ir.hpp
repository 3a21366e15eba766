#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "q2t/kg_store.hpp"

namespace q2t::query {

using kg::EntityId;
using kg::RelationId;
using NodeId = std::uint32_t;

enum class QueryType {
  k1p, k2p, k3p, k2i, k3i, kPi, kIp, k2u, kUp, k2in, k3in, kInp, kPin, kPni, kCustom,
};

// Evaluation order used for reports: the nine EPFO types, then the five
// negation types.
inline constexpr std::array<QueryType, 14> kAllTemplates = {
    QueryType::k1p,  QueryType::k2p,  QueryType::k3p,  QueryType::k2i, QueryType::k3i,
    QueryType::kPi,  QueryType::kIp,  QueryType::k2u,  QueryType::kUp, QueryType::k2in,
    QueryType::k3in, QueryType::kInp, QueryType::kPin, QueryType::kPni,
};
inline constexpr std::array<QueryType, 9> kEpfoTemplates = {
    QueryType::k1p, QueryType::k2p, QueryType::k3p, QueryType::k2i, QueryType::k3i,
    QueryType::kPi, QueryType::kIp, QueryType::k2u, QueryType::kUp,
};
inline constexpr std::array<QueryType, 5> kNegationTemplates = {
    QueryType::k2in, QueryType::k3in, QueryType::kInp, QueryType::kPin, QueryType::kPni,
};

std::string_view query_type_name(QueryType type);
QueryType parse_query_type(std::string_view name);

struct TemplateArity {
  std::size_t anchors = 0;
  std::size_t relations = 0;
};
TemplateArity template_arity(QueryType type);

enum class NodeKind { kAnchor, kVar, kFreeVar };

struct QueryNode {
  NodeKind kind = NodeKind::kVar;
  EntityId entity = 0;  // meaningful for anchors only

  friend bool operator==(const QueryNode&, const QueryNode&) = default;
};

struct QueryEdge {
  NodeId src = 0;
  NodeId dst = 0;
  RelationId relation = 0;
  bool negated = false;

  friend bool operator==(const QueryEdge&, const QueryEdge&) = default;
};

// One conjunctive clause as an anchored DAG; node ids are vector indices.
struct ConjunctiveGraph {
  std::vector<QueryNode> nodes;
  std::vector<QueryEdge> edges;

  // Index of the first FreeVar node; throws when absent.
  NodeId free_var() const;
  std::size_t variable_count() const;

  friend bool operator==(const ConjunctiveGraph&, const ConjunctiveGraph&) = default;
};

// Template slot values, in the left-to-right order of the nested-tuple form.
struct TemplateBinding {
  std::vector<EntityId> anchors;
  std::vector<RelationId> relations;

  friend bool operator==(const TemplateBinding&, const TemplateBinding&) = default;
};

struct DNFQuery {
  std::vector<ConjunctiveGraph> conjuncts;
  QueryType type = QueryType::kCustom;
  TemplateBinding binding;

  friend bool operator==(const DNFQuery&, const DNFQuery&) = default;
};

// Operator tree with unions, the form queries take before DNF conversion.
// Anchor and Project nodes refer to binding slots.
struct QueryExpr {
  enum class Op { kAnchor, kProject, kIntersect, kNegate, kUnion };

  Op op = Op::kAnchor;
  std::uint32_t slot = 0;
  std::vector<QueryExpr> children;

  static QueryExpr anchor(std::uint32_t slot);
  static QueryExpr project(QueryExpr input, std::uint32_t relation_slot);
  static QueryExpr intersect(std::vector<QueryExpr> branches);
  static QueryExpr negate(QueryExpr input);
  static QueryExpr unite(std::vector<QueryExpr> branches);
};

QueryExpr template_expression(QueryType type);

// Distributes projections and intersections over unions so that unions
// appear only at the top level. Unions under negation are rejected.
DNFQuery to_dnf(const QueryExpr& expr, const TemplateBinding& binding,
                QueryType type = QueryType::kCustom);
DNFQuery to_dnf(const DNFQuery& query);

DNFQuery build_from_template(QueryType type, std::span<const EntityId> anchors,
                             std::span<const RelationId> relations);

DNFQuery parse_nested(std::string_view form);
std::string serialize_nested(const DNFQuery& query);

struct LayerAssignment {
  std::vector<std::uint32_t> layer;
};

// Longest path from any source; throws kInvalidGraph on a cycle.
LayerAssignment topological_layers(const ConjunctiveGraph& graph);

std::vector<std::string> validate(const ConjunctiveGraph& graph);
std::vector<std::string> validate(const DNFQuery& query);

}  // namespace q2t::query
