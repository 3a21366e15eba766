#include "q2t/kg_store.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "q2t/error.hpp"
#include "q2t/key_value.hpp"

namespace q2t::kg {

std::string_view split_label_name(SplitLabel label) {
  switch (label) {
    case SplitLabel::kTrain: return "train";
    case SplitLabel::kTrainValid: return "train+valid";
    case SplitLabel::kFull: return "full";
  }
  return "train";
}

SplitLabel parse_split_label(std::string_view text) {
  if (text == "train") return SplitLabel::kTrain;
  if (text == "train+valid") return SplitLabel::kTrainValid;
  if (text == "full") return SplitLabel::kFull;
  throw Error(ErrorKind::kParse, fmt::format("unknown split label '{}'", text));
}

KnowledgeGraph::KnowledgeGraph(std::size_t num_entities, std::size_t num_relations,
                               std::vector<Triple> triples, SplitLabel label)
    : num_entities_(num_entities),
      num_relations_(num_relations),
      triples_(std::move(triples)),
      label_(label) {
  for (const auto& t : triples_) {
    if (t.head >= num_entities_ || t.tail >= num_entities_ || t.relation >= num_relations_) {
      throw Error(ErrorKind::kRange,
                  fmt::format("triple ({}, {}, {}) outside vocabulary |V|={} |R|={}", t.head,
                              t.relation, t.tail, num_entities_, num_relations_));
    }
  }
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());
}

bool KnowledgeGraph::contains(const Triple& triple) const {
  return std::binary_search(triples_.begin(), triples_.end(), triple);
}

bool KnowledgeGraph::is_subset_of(const KnowledgeGraph& other) const {
  return num_entities_ == other.num_entities_ && num_relations_ == other.num_relations_ &&
         std::includes(other.triples_.begin(), other.triples_.end(), triples_.begin(),
                       triples_.end());
}

GraphIndex::GraphIndex(const KnowledgeGraph& kg)
    : num_entities_(kg.num_entities()),
      num_relations_(kg.num_relations()),
      incoming_(kg.num_entities()) {
  // Triples are sorted by (head, relation, tail), so forward lists come out sorted.
  for (const auto& t : kg.triples()) {
    forward_[key(t.head, t.relation)].push_back(t.tail);
    backward_[key(t.tail, t.relation)].push_back(t.head);
    incoming_[t.tail].emplace_back(t.relation, t.head);
  }
  for (auto& [k, heads] : backward_) std::sort(heads.begin(), heads.end());
  for (auto& in : incoming_) std::sort(in.begin(), in.end());
}

std::span<const EntityId> GraphIndex::tails(EntityId head, RelationId relation) const {
  auto it = forward_.find(key(head, relation));
  if (it == forward_.end()) return {};
  return it->second;
}

std::span<const EntityId> GraphIndex::heads(EntityId tail, RelationId relation) const {
  auto it = backward_.find(key(tail, relation));
  if (it == backward_.end()) return {};
  return it->second;
}

bool GraphIndex::contains(EntityId head, RelationId relation, EntityId tail) const {
  auto list = tails(head, relation);
  return std::binary_search(list.begin(), list.end(), tail);
}

std::span<const std::pair<RelationId, EntityId>> GraphIndex::incoming(EntityId tail) const {
  if (tail >= incoming_.size()) return {};
  return incoming_[tail];
}

std::size_t GraphIndex::forward_pair_count() const {
  std::size_t total = 0;
  for (const auto& [k, tails] : forward_) total += tails.size();
  return total;
}

GraphIndex build_index(const KnowledgeGraph& kg) { return GraphIndex(kg); }

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot open '{}'", path.string()));
  return in;
}

std::uint32_t parse_id(std::string_view field, const std::filesystem::path& path,
                       std::size_t line_no) {
  const std::string cleaned = trim(field);
  std::int64_t value = -1;
  try {
    value = parse_int(cleaned, "id");
  } catch (const Error&) {
    value = -1;
  }
  if (value < 0 || value > static_cast<std::int64_t>(UINT32_MAX)) {
    throw Error(ErrorKind::kParse, fmt::format("{}:{}: malformed id '{}'", path.string(),
                                               line_no, cleaned));
  }
  return static_cast<std::uint32_t>(value);
}

}  // namespace

std::vector<std::string> load_name_map(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::pair<std::string, std::uint32_t>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorKind::kParse,
                  fmt::format("{}:{}: expected 'name<TAB>id'", path.string(), line_no));
    }
    rows.emplace_back(line.substr(0, tab), parse_id(line.substr(tab + 1), path, line_no));
  }
  std::vector<std::string> names(rows.size());
  std::vector<bool> seen(rows.size(), false);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto id = rows[i].second;
    if (id >= rows.size()) {
      throw Error(ErrorKind::kRange, fmt::format("{}:{}: id {} >= declared count {}",
                                                 path.string(), i + 1, id, rows.size()));
    }
    if (seen[id]) {
      throw Error(ErrorKind::kParse, fmt::format("{}: duplicate id {}", path.string(), id));
    }
    seen[id] = true;
    names[id] = std::move(rows[i].first);
  }
  return names;
}

KnowledgeGraph load_triples(const std::filesystem::path& triple_file, std::size_t num_entities,
                            std::size_t num_relations, SplitLabel label) {
  auto in = open_input(triple_file);
  std::vector<Triple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw Error(ErrorKind::kParse,
                  fmt::format("{}:{}: expected three tab-separated integers",
                              triple_file.string(), line_no));
    }
    Triple t{parse_id(fields[0], triple_file, line_no), parse_id(fields[1], triple_file, line_no),
             parse_id(fields[2], triple_file, line_no)};
    if (t.head >= num_entities || t.tail >= num_entities) {
      throw Error(ErrorKind::kRange,
                  fmt::format("{}:{}: entity id >= declared count {}", triple_file.string(),
                              line_no, num_entities));
    }
    if (t.relation >= num_relations) {
      throw Error(ErrorKind::kRange,
                  fmt::format("{}:{}: relation id {} >= declared count {}",
                              triple_file.string(), line_no, t.relation, num_relations));
    }
    triples.push_back(t);
  }
  return KnowledgeGraph(num_entities, num_relations, std::move(triples), label);
}

KnowledgeGraph load_kg(const std::filesystem::path& triple_file,
                       const std::filesystem::path& entity_map,
                       const std::filesystem::path& relation_map, SplitLabel label) {
  const auto entities = load_name_map(entity_map);
  const auto relations = load_name_map(relation_map);
  return load_triples(triple_file, entities.size(), relations.size(), label);
}

void save_triples(const KnowledgeGraph& kg, const std::filesystem::path& triple_file) {
  std::ofstream out(triple_file, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write '{}'", triple_file.string()));
  for (const auto& t : kg.triples()) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

void save_name_map(std::span<const std::string> names, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write '{}'", path.string()));
  for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << '\t' << i << '\n';
}

void write_manifest(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  KeyValueFile manifest;
  manifest.set("num_entities", std::to_string(kg.num_entities()));
  manifest.set("num_relations", std::to_string(kg.num_relations()));
  manifest.set("num_triples", std::to_string(kg.size()));
  manifest.set("split_label", std::string(split_label_name(kg.split_label())));
  manifest.write(path);
}

KnowledgeGraph merge_graphs(std::span<const KnowledgeGraph> parts, SplitLabel label) {
  if (parts.empty()) return KnowledgeGraph(0, 0, {}, label);
  const auto num_entities = parts.front().num_entities();
  const auto num_relations = parts.front().num_relations();
  std::vector<Triple> all;
  for (const auto& part : parts) {
    if (part.num_entities() != num_entities || part.num_relations() != num_relations) {
      throw Error(ErrorKind::kShape,
                  fmt::format("merge: vocabulary mismatch ({}x{} vs {}x{})", num_entities,
                              num_relations, part.num_entities(), part.num_relations()));
    }
    all.insert(all.end(), part.triples().begin(), part.triples().end());
  }
  return KnowledgeGraph(num_entities, num_relations, std::move(all), label);
}

SplitFamily load_split_family(const std::filesystem::path& dir) {
  SplitFamily family;
  family.vocabulary.entities = load_name_map(dir / "entity2id.txt");
  family.vocabulary.relations = load_name_map(dir / "relation2id.txt");
  const auto ne = family.vocabulary.entities.size();
  const auto nr = family.vocabulary.relations.size();

  family.train = load_triples(dir / "train.txt", ne, nr, SplitLabel::kTrain);
  family.valid_edges = std::filesystem::exists(dir / "valid.txt")
                           ? load_triples(dir / "valid.txt", ne, nr, SplitLabel::kTrainValid)
                           : KnowledgeGraph(ne, nr, {}, SplitLabel::kTrainValid);
  family.test_edges = std::filesystem::exists(dir / "test.txt")
                          ? load_triples(dir / "test.txt", ne, nr, SplitLabel::kFull)
                          : KnowledgeGraph(ne, nr, {}, SplitLabel::kFull);

  const KnowledgeGraph tv[] = {family.train, family.valid_edges};
  family.train_valid = merge_graphs(tv, SplitLabel::kTrainValid);
  const KnowledgeGraph all[] = {family.train_valid, family.test_edges};
  family.full = merge_graphs(all, SplitLabel::kFull);
  return family;
}

void save_split_family(const SplitFamily& family, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_triples(family.train, dir / "train.txt");
  save_triples(family.valid_edges, dir / "valid.txt");
  save_triples(family.test_edges, dir / "test.txt");
  save_name_map(family.vocabulary.entities, dir / "entity2id.txt");
  save_name_map(family.vocabulary.relations, dir / "relation2id.txt");
  write_manifest(family.full, dir / "manifest.txt");
}

}  // namespace q2t::kg
