#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "q2t/query_ir.hpp"

namespace q2t::encoding {

enum class AugNodeKind {
  kGraphHead,      // virtual g_h
  kGraphRelation,  // virtual g_r
  kAnchorEntity,
  kRelationNode,
  kVarNode,
  kFreeVarNode,
};

struct AugNode {
  AugNodeKind kind = AugNodeKind::kVarNode;
  std::uint32_t id = 0;  // entity id for anchors, relation id for relation nodes
  bool negated = false;

  bool is_virtual() const {
    return kind == AugNodeKind::kGraphHead || kind == AugNodeKind::kGraphRelation;
  }
  friend bool operator==(const AugNode&, const AugNode&) = default;
};

// Query graph with every edge u -r-> v replaced by u -> [r] -> v, plus the
// two virtual nodes. Layout: [g_h, g_r, original nodes by id, relation nodes
// by edge index].
struct AugmentedGraph {
  static constexpr std::size_t kVirtualCount = 2;

  std::vector<AugNode> nodes;
  // Directed edges between non-virtual nodes (indices into `nodes`).
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  std::size_t size() const { return nodes.size(); }
  std::size_t real_count() const { return nodes.size() - kVirtualCount; }
};

struct IntMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> values;

  IntMatrix() = default;
  IntMatrix(std::size_t r, std::size_t c, int fill = 0) : rows(r), cols(c), values(r * c, fill) {}

  int& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  int operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;
};

enum class EncodingMode { kDirectedDistance, kUndirectedDistance, kAdjacencyMask, kNone };

std::string_view encoding_mode_name(EncodingMode mode);
EncodingMode parse_encoding_mode(std::string_view name);

// kLiteral: dir = 1 when layer(i) >= layer(j), else 0.
// kSigned:  dir = 1 when layer(i) >= layer(j), else -1.
enum class DirectionRule { kLiteral, kSigned };

struct EncodingOptions {
  EncodingMode mode = EncodingMode::kDirectedDistance;
  int clamp = 8;
  DirectionRule direction = DirectionRule::kLiteral;
};

AugmentedGraph augment(const query::ConjunctiveGraph& graph);

// Longest-path layers on the augmented DAG (virtual nodes get 0).
std::vector<std::uint32_t> augmented_layers(const AugmentedGraph& aug);

// Undirected hop counts between non-virtual nodes, indexed from the first
// real node. Throws kInvalidGraph when the real nodes are disconnected.
IntMatrix shortest_path_lengths(const AugmentedGraph& aug);

// phi(i, j) = dir(i, j) * spd(i, j) over non-virtual nodes.
IntMatrix directed_distance(const AugmentedGraph& aug,
                            DirectionRule direction = DirectionRule::kLiteral);

// Buckets per mode, followed by VIRTUAL and SELF_VIRTUAL.
std::size_t bucket_count(const EncodingOptions& options);
int virtual_bucket(const EncodingOptions& options);
int self_virtual_bucket(const EncodingOptions& options);
// In adjacency_mask mode, the non-adjacent bucket is masked out of attention.
bool is_masked_bucket(const EncodingOptions& options, int bucket);

// Full (virtual included) bucket matrix in augmented-graph order.
IntMatrix bucketize(const AugmentedGraph& aug, const EncodingOptions& options);

struct SequenceInput {
  std::vector<AugNode> sequence;  // [g_h, g_r, v_1 .. v_n]
  IntMatrix buckets;              // m x m
  std::size_t num_buckets = 0;

  std::size_t length() const { return sequence.size(); }
};

// Canonical order: virtual nodes, then ascending layer with augmented index
// as the tiebreak. The bucket matrix is permuted accordingly.
SequenceInput flatten(const AugmentedGraph& aug, const EncodingOptions& options);

SequenceInput encode_graph(const query::ConjunctiveGraph& graph, const EncodingOptions& options);

// Reorders positions: result[k] = input[order[k]]; order must be a permutation.
SequenceInput permute_sequence(const SequenceInput& input, std::span<const std::size_t> order);

// Aligned integer grid, one row per line.
std::string format_bucket_matrix(const SequenceInput& input);

}  // namespace q2t::encoding
