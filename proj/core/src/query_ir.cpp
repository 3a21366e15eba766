#include "q2t/query_ir.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include <fmt/format.h>

#include "q2t/error.hpp"
#include "q2t/key_value.hpp"

namespace q2t::query {

namespace {

struct TemplateInfo {
  QueryType type;
  std::string_view name;
  // Nested-tuple shape; E is an anchor slot, R a relation slot.
  std::string_view pattern;
};

constexpr std::array<TemplateInfo, 14> kTemplates = {{
    {QueryType::k1p, "1p", "(E,(R,))"},
    {QueryType::k2p, "2p", "(E,(R,R))"},
    {QueryType::k3p, "3p", "(E,(R,R,R))"},
    {QueryType::k2i, "2i", "((E,(R,)),(E,(R,)))"},
    {QueryType::k3i, "3i", "((E,(R,)),(E,(R,)),(E,(R,)))"},
    {QueryType::kPi, "pi", "((E,(R,R)),(E,(R,)))"},
    {QueryType::kIp, "ip", "(((E,(R,)),(E,(R,))),(R,))"},
    {QueryType::k2u, "2u", "((E,(R,)),(E,(R,)),(u,))"},
    {QueryType::kUp, "up", "(((E,(R,)),(E,(R,)),(u,)),(R,))"},
    {QueryType::k2in, "2in", "((E,(R,)),(E,(R,n)))"},
    {QueryType::k3in, "3in", "((E,(R,)),(E,(R,)),(E,(R,n)))"},
    {QueryType::kInp, "inp", "(((E,(R,)),(E,(R,n))),(R,))"},
    {QueryType::kPin, "pin", "((E,(R,R)),(E,(R,n)))"},
    {QueryType::kPni, "pni", "((E,(R,R,n)),(E,(R,)))"},
}};

const TemplateInfo& info(QueryType type) {
  for (const auto& t : kTemplates) {
    if (t.type == type) return t;
  }
  throw Error(ErrorKind::kUnsupportedQuery, "custom queries have no template");
}

using Expr = QueryExpr;
using Op = QueryExpr::Op;

bool contains_union(const Expr& expr) {
  if (expr.op == Op::kUnion) return true;
  return std::any_of(expr.children.begin(), expr.children.end(), contains_union);
}

// Union-free alternatives of `expr`.
std::vector<Expr> expand(const Expr& expr) {
  switch (expr.op) {
    case Op::kAnchor:
      return {expr};
    case Op::kProject: {
      std::vector<Expr> out;
      for (auto& alt : expand(expr.children.at(0))) out.push_back(Expr::project(alt, expr.slot));
      return out;
    }
    case Op::kNegate:
      if (contains_union(expr.children.at(0))) {
        throw Error(ErrorKind::kUnsupportedQuery, "unsupported query structure: union under negation");
      }
      return {expr};
    case Op::kIntersect: {
      std::vector<std::vector<Expr>> partial{{}};
      for (const auto& child : expr.children) {
        const auto alts = expand(child);
        std::vector<std::vector<Expr>> next;
        for (const auto& prefix : partial) {
          for (const auto& alt : alts) {
            auto combined = prefix;
            combined.push_back(alt);
            next.push_back(std::move(combined));
          }
        }
        partial = std::move(next);
      }
      std::vector<Expr> out;
      for (auto& branches : partial) out.push_back(Expr::intersect(std::move(branches)));
      return out;
    }
    case Op::kUnion: {
      std::vector<Expr> out;
      for (const auto& child : expr.children) {
        auto alts = expand(child);
        out.insert(out.end(), alts.begin(), alts.end());
      }
      return out;
    }
  }
  return {};
}

class GraphBuilder {
 public:
  explicit GraphBuilder(const TemplateBinding& binding) : binding_(binding) {}

  ConjunctiveGraph build(const Expr& expr) {
    auto incoming = literals(expr);
    const auto free = add_node({NodeKind::kFreeVar, 0});
    connect(incoming, free);
    return std::move(graph_);
  }

 private:
  struct Literal {
    NodeId src;
    RelationId relation;
    bool negated;
  };

  NodeId add_node(QueryNode node) {
    graph_.nodes.push_back(node);
    return static_cast<NodeId>(graph_.nodes.size() - 1);
  }

  void connect(const std::vector<Literal>& incoming, NodeId dst) {
    for (const auto& lit : incoming) graph_.edges.push_back({lit.src, dst, lit.relation, lit.negated});
  }

  RelationId relation(std::uint32_t slot) const {
    if (slot >= binding_.relations.size()) {
      throw Error(ErrorKind::kArity, fmt::format("relation slot {} is unbound", slot));
    }
    return binding_.relations[slot];
  }

  NodeId materialize(const Expr& expr) {
    if (expr.op == Op::kAnchor) {
      if (expr.slot >= binding_.anchors.size()) {
        throw Error(ErrorKind::kArity, fmt::format("anchor slot {} is unbound", expr.slot));
      }
      return add_node({NodeKind::kAnchor, binding_.anchors[expr.slot]});
    }
    auto incoming = literals(expr);
    const auto var = add_node({NodeKind::kVar, 0});
    connect(incoming, var);
    return var;
  }

  std::vector<Literal> literals(const Expr& expr) {
    switch (expr.op) {
      case Op::kProject:
        return {{materialize(expr.children.at(0)), relation(expr.slot), false}};
      case Op::kNegate: {
        const auto& inner = expr.children.at(0);
        if (inner.op != Op::kProject) {
          throw Error(ErrorKind::kUnsupportedQuery,
                      "unsupported query structure: negation must wrap a projection");
        }
        return {{materialize(inner.children.at(0)), relation(inner.slot), true}};
      }
      case Op::kIntersect: {
        std::vector<Literal> out;
        for (const auto& child : expr.children) {
          auto part = literals(child);
          out.insert(out.end(), part.begin(), part.end());
        }
        return out;
      }
      case Op::kAnchor:
        throw Error(ErrorKind::kUnsupportedQuery,
                    "unsupported query structure: bare anchor in variable position");
      case Op::kUnion:
        throw Error(ErrorKind::kUnsupportedQuery, "unsupported query structure: nested union");
    }
    return {};
  }

  const TemplateBinding& binding_;
  ConjunctiveGraph graph_;
};

}  // namespace

std::string_view query_type_name(QueryType type) {
  if (type == QueryType::kCustom) return "custom";
  return info(type).name;
}

QueryType parse_query_type(std::string_view name) {
  for (const auto& t : kTemplates) {
    if (t.name == name) return t.type;
  }
  if (name == "custom") return QueryType::kCustom;
  throw Error(ErrorKind::kParse, fmt::format("unknown query type '{}'", name));
}

TemplateArity template_arity(QueryType type) {
  TemplateArity arity;
  for (char c : info(type).pattern) {
    if (c == 'E') ++arity.anchors;
    if (c == 'R') ++arity.relations;
  }
  return arity;
}

NodeId ConjunctiveGraph::free_var() const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == NodeKind::kFreeVar) return static_cast<NodeId>(i);
  }
  throw Error(ErrorKind::kInvalidGraph, "query graph has no free variable");
}

std::size_t ConjunctiveGraph::variable_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [](const QueryNode& n) { return n.kind != NodeKind::kAnchor; }));
}

QueryExpr QueryExpr::anchor(std::uint32_t slot) { return {Op::kAnchor, slot, {}}; }

QueryExpr QueryExpr::project(QueryExpr input, std::uint32_t relation_slot) {
  QueryExpr e{Op::kProject, relation_slot, {}};
  e.children.push_back(std::move(input));
  return e;
}

QueryExpr QueryExpr::intersect(std::vector<QueryExpr> branches) {
  return {Op::kIntersect, 0, std::move(branches)};
}

QueryExpr QueryExpr::negate(QueryExpr input) {
  QueryExpr e{Op::kNegate, 0, {}};
  e.children.push_back(std::move(input));
  return e;
}

QueryExpr QueryExpr::unite(std::vector<QueryExpr> branches) {
  return {Op::kUnion, 0, std::move(branches)};
}

QueryExpr template_expression(QueryType type) {
  using E = QueryExpr;
  const auto a = [](std::uint32_t s) { return E::anchor(s); };
  const auto p = [](E in, std::uint32_t r) { return E::project(std::move(in), r); };
  switch (type) {
    case QueryType::k1p: return p(a(0), 0);
    case QueryType::k2p: return p(p(a(0), 0), 1);
    case QueryType::k3p: return p(p(p(a(0), 0), 1), 2);
    case QueryType::k2i: return E::intersect({p(a(0), 0), p(a(1), 1)});
    case QueryType::k3i: return E::intersect({p(a(0), 0), p(a(1), 1), p(a(2), 2)});
    case QueryType::kPi: return E::intersect({p(p(a(0), 0), 1), p(a(1), 2)});
    case QueryType::kIp: return p(E::intersect({p(a(0), 0), p(a(1), 1)}), 2);
    case QueryType::k2u: return E::unite({p(a(0), 0), p(a(1), 1)});
    case QueryType::kUp: return p(E::unite({p(a(0), 0), p(a(1), 1)}), 2);
    case QueryType::k2in: return E::intersect({p(a(0), 0), E::negate(p(a(1), 1))});
    case QueryType::k3in:
      return E::intersect({p(a(0), 0), p(a(1), 1), E::negate(p(a(2), 2))});
    case QueryType::kInp: return p(E::intersect({p(a(0), 0), E::negate(p(a(1), 1))}), 2);
    case QueryType::kPin: return E::intersect({p(p(a(0), 0), 1), E::negate(p(a(1), 2))});
    case QueryType::kPni: return E::intersect({E::negate(p(p(a(0), 0), 1)), p(a(1), 2)});
    case QueryType::kCustom: break;
  }
  throw Error(ErrorKind::kUnsupportedQuery, "custom queries have no template expression");
}

DNFQuery to_dnf(const QueryExpr& expr, const TemplateBinding& binding, QueryType type) {
  DNFQuery query;
  query.type = type;
  query.binding = binding;
  for (const auto& alt : expand(expr)) query.conjuncts.push_back(GraphBuilder(binding).build(alt));
  return query;
}

DNFQuery to_dnf(const DNFQuery& query) {
  if (query.conjuncts.empty()) {
    throw Error(ErrorKind::kInvalidGraph, "DNF query has no conjuncts");
  }
  return query;
}

DNFQuery build_from_template(QueryType type, std::span<const EntityId> anchors,
                             std::span<const RelationId> relations) {
  if (type == QueryType::kCustom) {
    throw Error(ErrorKind::kUnsupportedQuery, "custom queries cannot be built from a template");
  }
  const auto arity = template_arity(type);
  if (anchors.size() != arity.anchors || relations.size() != arity.relations) {
    throw Error(ErrorKind::kArity,
                fmt::format("template {} requires {} anchor(s) and {} relation(s), got {} and {}",
                            query_type_name(type), arity.anchors, arity.relations, anchors.size(),
                            relations.size()));
  }
  TemplateBinding binding{{anchors.begin(), anchors.end()}, {relations.begin(), relations.end()}};
  return to_dnf(template_expression(type), binding, type);
}

DNFQuery parse_nested(std::string_view form) {
  std::string shape;
  std::vector<std::uint32_t> numbers;
  for (std::size_t i = 0; i < form.size();) {
    const char c = form[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
    } else if (c >= '0' && c <= '9') {
      std::size_t j = i;
      while (j < form.size() && form[j] >= '0' && form[j] <= '9') ++j;
      const auto value = parse_int(form.substr(i, j - i), "query id");
      if (value > static_cast<std::int64_t>(UINT32_MAX)) {
        throw Error(ErrorKind::kParse, fmt::format("query id {} out of range", value));
      }
      numbers.push_back(static_cast<std::uint32_t>(value));
      shape += '#';
      i = j;
    } else if (c == '(' || c == ')' || c == ',' || c == 'n' || c == 'u') {
      shape += c;
      ++i;
    } else {
      throw Error(ErrorKind::kParse,
                  fmt::format("unexpected character '{}' in query form '{}'", c, form));
    }
  }
  for (const auto& t : kTemplates) {
    std::string generic(t.pattern);
    std::replace_if(generic.begin(), generic.end(), [](char c) { return c == 'E' || c == 'R'; },
                    '#');
    if (generic != shape) continue;
    std::vector<EntityId> anchors;
    std::vector<RelationId> relations;
    std::size_t next = 0;
    for (char c : t.pattern) {
      if (c == 'E') anchors.push_back(numbers[next++]);
      if (c == 'R') relations.push_back(numbers[next++]);
    }
    return build_from_template(t.type, anchors, relations);
  }
  throw Error(ErrorKind::kUnsupportedQuery,
              fmt::format("unsupported query structure '{}'", form));
}

std::string serialize_nested(const DNFQuery& query) {
  if (query.type == QueryType::kCustom) {
    throw Error(ErrorKind::kUnsupportedQuery, "custom queries have no nested-tuple form");
  }
  const auto arity = template_arity(query.type);
  if (query.binding.anchors.size() != arity.anchors ||
      query.binding.relations.size() != arity.relations) {
    throw Error(ErrorKind::kArity, "query binding does not match its template");
  }
  std::string out;
  std::size_t a = 0;
  std::size_t r = 0;
  for (char c : info(query.type).pattern) {
    if (c == 'E') {
      out += std::to_string(query.binding.anchors[a++]);
    } else if (c == 'R') {
      out += std::to_string(query.binding.relations[r++]);
    } else {
      out += c;
    }
  }
  return out;
}

LayerAssignment topological_layers(const ConjunctiveGraph& graph) {
  const auto n = graph.nodes.size();
  std::vector<std::vector<NodeId>> out(n);
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& e : graph.edges) {
    if (e.src >= n || e.dst >= n) throw Error(ErrorKind::kInvalidGraph, "edge endpoint out of range");
    out[e.src].push_back(e.dst);
    ++indegree[e.dst];
  }
  LayerAssignment result;
  result.layer.assign(n, 0);
  std::deque<NodeId> ready;
  for (NodeId v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push_back(v);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const auto u = ready.front();
    ready.pop_front();
    ++visited;
    for (auto v : out[u]) {
      result.layer[v] = std::max(result.layer[v], result.layer[u] + 1);
      if (--indegree[v] == 0) ready.push_back(v);
    }
  }
  if (visited != n) throw Error(ErrorKind::kInvalidGraph, "query graph contains a cycle");
  return result;
}

std::vector<std::string> validate(const ConjunctiveGraph& graph) {
  std::vector<std::string> violations;
  const auto n = graph.nodes.size();
  if (n == 0) return {"empty graph"};

  std::vector<std::size_t> indeg(n, 0);
  std::vector<std::size_t> outdeg(n, 0);
  bool endpoints_ok = true;
  for (const auto& e : graph.edges) {
    if (e.src >= n || e.dst >= n) {
      violations.push_back("edge endpoint out of range");
      endpoints_ok = false;
      continue;
    }
    if (e.src == e.dst) violations.push_back(fmt::format("self loop on node {}", e.src));
    ++outdeg[e.src];
    ++indeg[e.dst];
  }

  std::size_t free_count = 0;
  for (std::size_t v = 0; v < n; ++v) {
    const auto& node = graph.nodes[v];
    if (node.kind == NodeKind::kFreeVar) {
      ++free_count;
      if (outdeg[v] != 0) violations.push_back("free variable is not sink");
    } else if (outdeg[v] == 0) {
      violations.push_back(fmt::format("node {} is a sink but not the free variable", v));
    }
    if (node.kind == NodeKind::kAnchor && indeg[v] != 0) {
      violations.push_back(fmt::format("anchor {} has an incoming edge", v));
    }
    if (node.kind != NodeKind::kAnchor && indeg[v] == 0) {
      violations.push_back(fmt::format("variable {} has no incoming edge", v));
    }
  }
  if (free_count == 0) violations.push_back("no free variable");
  if (free_count > 1) violations.push_back("multiple free variables");
  if (!endpoints_ok) return violations;

  try {
    topological_layers(graph);
  } catch (const Error&) {
    violations.push_back("graph contains a cycle");
  }

  // Weak connectivity via union-find.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : graph.edges) parent[find(e.src)] = find(e.dst);
  for (std::size_t v = 1; v < n; ++v) {
    if (find(v) != find(0)) {
      violations.push_back("graph is not weakly connected");
      break;
    }
  }
  return violations;
}

std::vector<std::string> validate(const DNFQuery& query) {
  if (query.conjuncts.empty()) return {"query has no conjuncts"};
  std::vector<std::string> violations;
  for (std::size_t i = 0; i < query.conjuncts.size(); ++i) {
    for (auto& v : validate(query.conjuncts[i])) {
      violations.push_back(fmt::format("conjunct {}: {}", i, v));
    }
  }
  return violations;
}

}  // namespace q2t::query
