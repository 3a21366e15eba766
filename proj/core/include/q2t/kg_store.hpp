#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace q2t::kg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

enum class SplitLabel { kTrain, kTrainValid, kFull };

std::string_view split_label_name(SplitLabel label);
SplitLabel parse_split_label(std::string_view text);

// An immutable triple set over a fixed vocabulary. Triples are kept sorted
// and unique.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  // Validates ranges, sorts and deduplicates.
  KnowledgeGraph(std::size_t num_entities, std::size_t num_relations,
                 std::vector<Triple> triples, SplitLabel label = SplitLabel::kTrain);

  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }
  std::span<const Triple> triples() const { return triples_; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }
  SplitLabel split_label() const { return label_; }

  bool contains(const Triple& triple) const;
  // True when every triple of this graph is in `other` and vocabularies match.
  bool is_subset_of(const KnowledgeGraph& other) const;

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::vector<Triple> triples_;
  SplitLabel label_ = SplitLabel::kTrain;
};

// Relation-indexed adjacency in both directions. Tail and head lists are
// sorted ascending.
class GraphIndex {
 public:
  explicit GraphIndex(const KnowledgeGraph& kg);

  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }

  std::span<const EntityId> tails(EntityId head, RelationId relation) const;
  std::span<const EntityId> heads(EntityId tail, RelationId relation) const;
  bool contains(EntityId head, RelationId relation, EntityId tail) const;

  // All (relation, head) pairs with an edge into `tail`, sorted.
  std::span<const std::pair<RelationId, EntityId>> incoming(EntityId tail) const;

  std::size_t forward_pair_count() const;
  const std::unordered_map<std::uint64_t, std::vector<EntityId>>& forward() const {
    return forward_;
  }
  const std::unordered_map<std::uint64_t, std::vector<EntityId>>& backward() const {
    return backward_;
  }

  static std::uint64_t key(EntityId entity, RelationId relation) {
    return (static_cast<std::uint64_t>(entity) << 32) | relation;
  }

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> forward_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> backward_;
  std::vector<std::vector<std::pair<RelationId, EntityId>>> incoming_;
};

GraphIndex build_index(const KnowledgeGraph& kg);

// Name tables read from "name<TAB>id" map files, indexed by id.
struct Vocabulary {
  std::vector<std::string> entities;
  std::vector<std::string> relations;
};

std::vector<std::string> load_name_map(const std::filesystem::path& path);

KnowledgeGraph load_kg(const std::filesystem::path& triple_file,
                       const std::filesystem::path& entity_map,
                       const std::filesystem::path& relation_map,
                       SplitLabel label = SplitLabel::kTrain);

// Triple-file reader against known vocabulary sizes.
KnowledgeGraph load_triples(const std::filesystem::path& triple_file, std::size_t num_entities,
                            std::size_t num_relations, SplitLabel label = SplitLabel::kTrain);

void save_triples(const KnowledgeGraph& kg, const std::filesystem::path& triple_file);
void save_name_map(std::span<const std::string> names, const std::filesystem::path& path);
void write_manifest(const KnowledgeGraph& kg, const std::filesystem::path& path);

KnowledgeGraph merge_graphs(std::span<const KnowledgeGraph> parts, SplitLabel label);

// The train / train+valid / full family plus the raw valid and test edges.
struct SplitFamily {
  KnowledgeGraph train;
  KnowledgeGraph train_valid;
  KnowledgeGraph full;
  KnowledgeGraph valid_edges;
  KnowledgeGraph test_edges;
  Vocabulary vocabulary;
};

// Directory layout: train.txt, valid.txt, test.txt, entity2id.txt,
// relation2id.txt. valid.txt and test.txt may be absent.
SplitFamily load_split_family(const std::filesystem::path& dir);
void save_split_family(const SplitFamily& family, const std::filesystem::path& dir);

}  // namespace q2t::kg
