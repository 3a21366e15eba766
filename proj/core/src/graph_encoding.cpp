#include "q2t/graph_encoding.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include <fmt/format.h>

#include "q2t/error.hpp"

namespace q2t::encoding {

std::string_view encoding_mode_name(EncodingMode mode) {
  switch (mode) {
    case EncodingMode::kDirectedDistance: return "directed_distance";
    case EncodingMode::kUndirectedDistance: return "undirected_distance";
    case EncodingMode::kAdjacencyMask: return "adjacency_mask";
    case EncodingMode::kNone: return "none";
  }
  return "none";
}

EncodingMode parse_encoding_mode(std::string_view name) {
  for (auto mode : {EncodingMode::kDirectedDistance, EncodingMode::kUndirectedDistance,
                    EncodingMode::kAdjacencyMask, EncodingMode::kNone}) {
    if (encoding_mode_name(mode) == name) return mode;
  }
  throw Error(ErrorKind::kConfig, fmt::format("unknown encoding mode '{}'", name));
}

AugmentedGraph augment(const query::ConjunctiveGraph& graph) {
  AugmentedGraph aug;
  aug.nodes.push_back({AugNodeKind::kGraphHead, 0, false});
  aug.nodes.push_back({AugNodeKind::kGraphRelation, 0, false});
  const auto base = static_cast<std::uint32_t>(AugmentedGraph::kVirtualCount);
  for (const auto& node : graph.nodes) {
    switch (node.kind) {
      case query::NodeKind::kAnchor:
        aug.nodes.push_back({AugNodeKind::kAnchorEntity, node.entity, false});
        break;
      case query::NodeKind::kVar:
        aug.nodes.push_back({AugNodeKind::kVarNode, 0, false});
        break;
      case query::NodeKind::kFreeVar:
        aug.nodes.push_back({AugNodeKind::kFreeVarNode, 0, false});
        break;
    }
  }
  for (const auto& e : graph.edges) {
    const auto rel = static_cast<std::uint32_t>(aug.nodes.size());
    aug.nodes.push_back({AugNodeKind::kRelationNode, e.relation, e.negated});
    aug.edges.emplace_back(base + e.src, rel);
    aug.edges.emplace_back(rel, base + e.dst);
  }
  return aug;
}

std::vector<std::uint32_t> augmented_layers(const AugmentedGraph& aug) {
  query::ConjunctiveGraph dag;
  const auto base = AugmentedGraph::kVirtualCount;
  dag.nodes.resize(aug.real_count());
  for (const auto& [u, v] : aug.edges) {
    dag.edges.push_back({static_cast<query::NodeId>(u - base), static_cast<query::NodeId>(v - base), 0,
                         false});
  }
  const auto real = query::topological_layers(dag);
  std::vector<std::uint32_t> layers(aug.size(), 0);
  std::copy(real.layer.begin(), real.layer.end(), layers.begin() + static_cast<std::ptrdiff_t>(base));
  return layers;
}

IntMatrix shortest_path_lengths(const AugmentedGraph& aug) {
  const auto n = aug.real_count();
  const auto base = AugmentedGraph::kVirtualCount;
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (const auto& [u, v] : aug.edges) {
    adjacency[u - base].push_back(v - base);
    adjacency[v - base].push_back(u - base);
  }
  IntMatrix spd(n, n, -1);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    spd(s, s) = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto v : adjacency[u]) {
        if (spd(s, v) >= 0) continue;
        spd(s, v) = spd(s, u) + 1;
        queue.push_back(v);
      }
    }
  }
  if (std::find(spd.values.begin(), spd.values.end(), -1) != spd.values.end()) {
    throw Error(ErrorKind::kInvalidGraph, "augmented query graph is disconnected");
  }
  return spd;
}

IntMatrix directed_distance(const AugmentedGraph& aug, DirectionRule direction) {
  const auto spd = shortest_path_lengths(aug);
  const auto layers = augmented_layers(aug);
  const auto base = AugmentedGraph::kVirtualCount;
  IntMatrix phi(spd.rows, spd.cols, 0);
  for (std::size_t i = 0; i < spd.rows; ++i) {
    for (std::size_t j = 0; j < spd.cols; ++j) {
      const bool forward = layers[base + i] >= layers[base + j];
      const int dir = forward ? 1 : (direction == DirectionRule::kLiteral ? 0 : -1);
      phi(i, j) = dir * spd(i, j);
    }
  }
  return phi;
}

namespace {

std::size_t real_bucket_count(const EncodingOptions& options) {
  switch (options.mode) {
    case EncodingMode::kDirectedDistance: return static_cast<std::size_t>(2 * options.clamp + 1);
    case EncodingMode::kUndirectedDistance: return static_cast<std::size_t>(options.clamp + 1);
    case EncodingMode::kAdjacencyMask: return 2;
    case EncodingMode::kNone: return 1;
  }
  return 1;
}

void check_options(const EncodingOptions& options) {
  if (options.clamp < 1) throw Error(ErrorKind::kConfig, "distance clamp must be >= 1");
}

}  // namespace

std::size_t bucket_count(const EncodingOptions& options) {
  check_options(options);
  return real_bucket_count(options) + 2;
}

int virtual_bucket(const EncodingOptions& options) {
  return static_cast<int>(real_bucket_count(options));
}

int self_virtual_bucket(const EncodingOptions& options) {
  return static_cast<int>(real_bucket_count(options)) + 1;
}

bool is_masked_bucket(const EncodingOptions& options, int bucket) {
  return options.mode == EncodingMode::kAdjacencyMask && bucket == 1;
}

IntMatrix bucketize(const AugmentedGraph& aug, const EncodingOptions& options) {
  check_options(options);
  const auto m = aug.size();
  const auto base = AugmentedGraph::kVirtualCount;
  const int clamp = options.clamp;
  IntMatrix buckets(m, m, virtual_bucket(options));
  for (std::size_t v = 0; v < base; ++v) buckets(v, v) = self_virtual_bucket(options);

  IntMatrix real;
  switch (options.mode) {
    case EncodingMode::kDirectedDistance:
      real = directed_distance(aug, options.direction);
      for (auto& value : real.values) value = std::clamp(value, -clamp, clamp) + clamp;
      break;
    case EncodingMode::kUndirectedDistance:
      real = shortest_path_lengths(aug);
      for (auto& value : real.values) value = std::min(value, clamp);
      break;
    case EncodingMode::kAdjacencyMask:
      real = shortest_path_lengths(aug);
      for (auto& value : real.values) value = value <= 1 ? 0 : 1;
      break;
    case EncodingMode::kNone:
      real = IntMatrix(aug.real_count(), aug.real_count(), 0);
      shortest_path_lengths(aug);  // connectivity check
      break;
  }
  for (std::size_t i = 0; i < real.rows; ++i) {
    for (std::size_t j = 0; j < real.cols; ++j) buckets(base + i, base + j) = real(i, j);
  }
  return buckets;
}

SequenceInput flatten(const AugmentedGraph& aug, const EncodingOptions& options) {
  const auto layers = augmented_layers(aug);
  std::vector<std::size_t> order(aug.size());
  std::iota(order.begin(), order.end(), 0);
  const auto base = AugmentedGraph::kVirtualCount;
  std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(base), order.end(),
                   [&](std::size_t a, std::size_t b) { return layers[a] < layers[b]; });

  SequenceInput raw;
  for (const auto& node : aug.nodes) raw.sequence.push_back(node);
  raw.buckets = bucketize(aug, options);
  raw.num_buckets = bucket_count(options);
  return permute_sequence(raw, order);
}

SequenceInput encode_graph(const query::ConjunctiveGraph& graph, const EncodingOptions& options) {
  return flatten(augment(graph), options);
}

SequenceInput permute_sequence(const SequenceInput& input, std::span<const std::size_t> order) {
  const auto m = input.length();
  if (order.size() != m) throw Error(ErrorKind::kShape, "permutation length mismatch");
  std::vector<bool> seen(m, false);
  for (auto k : order) {
    if (k >= m || seen[k]) throw Error(ErrorKind::kShape, "order is not a permutation");
    seen[k] = true;
  }
  SequenceInput out;
  out.num_buckets = input.num_buckets;
  out.buckets = IntMatrix(m, m, 0);
  for (std::size_t a = 0; a < m; ++a) {
    out.sequence.push_back(input.sequence[order[a]]);
    for (std::size_t b = 0; b < m; ++b) out.buckets(a, b) = input.buckets(order[a], order[b]);
  }
  return out;
}

std::string format_bucket_matrix(const SequenceInput& input) {
  std::string out;
  for (std::size_t i = 0; i < input.buckets.rows; ++i) {
    for (std::size_t j = 0; j < input.buckets.cols; ++j) {
      out += fmt::format("{:>4}", input.buckets(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace q2t::encoding
