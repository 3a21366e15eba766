#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "q2t/error.hpp"
#include "q2t/kg_store.hpp"
#include "q2t/synthetic.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace q2t;
using kg::KnowledgeGraph;
using kg::Triple;

namespace {

void write_maps(const fixtures::TempDir& dir, std::size_t ne, std::size_t nr) {
  std::string ents, rels;
  for (std::size_t i = 0; i < ne; ++i) ents += "e" + std::to_string(i) + "\t" + std::to_string(i) + "\n";
  for (std::size_t i = 0; i < nr; ++i) rels += "r" + std::to_string(i) + "\t" + std::to_string(i) + "\n";
  dir.write("entity2id.txt", ents);
  dir.write("relation2id.txt", rels);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

}  // namespace

TEST(KgStore, EmptyTripleFileKeepsVocabulary) {
  fixtures::TempDir dir;
  write_maps(dir, 3, 2);
  dir.write("train.txt", "");
  const auto kg = kg::load_kg(dir / "train.txt", dir / "entity2id.txt", dir / "relation2id.txt");
  EXPECT_EQ(kg.size(), 0u);
  EXPECT_EQ(kg.num_entities(), 3u);
  EXPECT_EQ(kg.num_relations(), 2u);
}

TEST(KgStore, DuplicateLinesDeduplicated) {
  fixtures::TempDir dir;
  write_maps(dir, 3, 2);
  dir.write("train.txt", "0\t1\t2\n0\t1\t2\n");
  const auto kg = kg::load_kg(dir / "train.txt", dir / "entity2id.txt", dir / "relation2id.txt");
  EXPECT_EQ(kg.size(), 1u);
}

TEST(KgStore, MalformedLineReportsLineNumber) {
  fixtures::TempDir dir;
  write_maps(dir, 3, 2);
  dir.write("train.txt", "0\t1\t2\n0\tx\t2\n");
  try {
    kg::load_kg(dir / "train.txt", dir / "entity2id.txt", dir / "relation2id.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(KgStore, OutOfRangeIdIsRangeError) {
  fixtures::TempDir dir;
  write_maps(dir, 3, 2);
  dir.write("train.txt", "0\t1\t3\n");
  EXPECT_EQ(kind_of([&] {
              kg::load_kg(dir / "train.txt", dir / "entity2id.txt", dir / "relation2id.txt");
            }),
            ErrorKind::kRange);
  dir.write("train.txt", "0\t2\t1\n");
  EXPECT_EQ(kind_of([&] {
              kg::load_kg(dir / "train.txt", dir / "entity2id.txt", dir / "relation2id.txt");
            }),
            ErrorKind::kRange);
}

TEST(KgStore, IndexExamples) {
  const KnowledgeGraph one(3, 1, {{0, 0, 1}});
  const kg::GraphIndex idx(one);
  ASSERT_EQ(idx.tails(0, 0).size(), 1u);
  EXPECT_EQ(idx.tails(0, 0)[0], 1u);
  ASSERT_EQ(idx.heads(1, 0).size(), 1u);
  EXPECT_EQ(idx.heads(1, 0)[0], 0u);

  const KnowledgeGraph two(3, 1, {{0, 0, 2}, {0, 0, 1}});
  const kg::GraphIndex idx2(two);
  EXPECT_EQ(std::vector<kg::EntityId>(idx2.tails(0, 0).begin(), idx2.tails(0, 0).end()),
            (std::vector<kg::EntityId>{1, 2}));
  EXPECT_TRUE(idx2.tails(1, 0).empty());
}

TEST(KgStore, IndexIsExactTranspose) {
  std::mt19937_64 rng(11);
  const auto kg = fixtures::random_kg(60, 5, 500, rng);
  const kg::GraphIndex idx(kg);
  std::size_t forward_entries = 0;
  for (const auto& [key, tails] : idx.forward()) {
    const auto h = static_cast<kg::EntityId>(key >> 32);
    const auto r = static_cast<kg::RelationId>(key & 0xffffffffu);
    EXPECT_TRUE(std::is_sorted(tails.begin(), tails.end()));
    for (auto t : tails) {
      const auto heads = idx.heads(t, r);
      EXPECT_TRUE(std::binary_search(heads.begin(), heads.end(), h));
      EXPECT_TRUE(kg.contains({h, r, t}));
    }
    forward_entries += tails.size();
  }
  std::size_t backward_entries = 0;
  for (const auto& [key, heads] : idx.backward()) backward_entries += heads.size();
  EXPECT_EQ(forward_entries, kg.size());
  EXPECT_EQ(backward_entries, kg.size());
  for (const auto& t : kg.triples()) {
    EXPECT_TRUE(idx.contains(t.head, t.relation, t.tail));
    const auto in = idx.incoming(t.tail);
    EXPECT_TRUE(std::binary_search(in.begin(), in.end(), std::pair{t.relation, t.head}));
  }
}

TEST(KgStore, MergeExamples) {
  std::vector<Triple> a, b;
  for (kg::EntityId i = 0; i < 10; ++i) a.push_back({i, 0, i + 1});
  for (kg::EntityId i = 20; i < 25; ++i) b.push_back({i, 0, i + 1});
  const KnowledgeGraph ga(40, 1, a), gb(40, 1, b), empty(40, 1, {});
  EXPECT_EQ(kg::merge_graphs(std::vector{ga, empty}, kg::SplitLabel::kTrain).triples().size(), 10u);
  EXPECT_EQ(kg::merge_graphs(std::vector{ga, gb}, kg::SplitLabel::kTrain).size(), 15u);

  std::vector<Triple> c(a.begin(), a.begin() + 4);
  for (kg::EntityId i = 30; i < 36; ++i) c.push_back({i, 0, i + 1});
  const KnowledgeGraph gc(40, 1, c);
  EXPECT_EQ(kg::merge_graphs(std::vector{ga, gc}, kg::SplitLabel::kTrain).size(), 16u);

  const KnowledgeGraph other_vocab(41, 1, {});
  EXPECT_EQ(kind_of([&] { kg::merge_graphs(std::vector{ga, other_vocab}, kg::SplitLabel::kTrain); }),
            ErrorKind::kShape);
}

TEST(KgStore, SplitFamilyNestsAndRoundTrips) {
  kg::SyntheticSpec spec;
  spec.valid_fraction = 0.1;
  spec.test_fraction = 0.1;
  spec.seed = 4;
  const auto family = kg::make_synthetic_family(spec);
  EXPECT_TRUE(family.train.is_subset_of(family.train_valid));
  EXPECT_TRUE(family.train_valid.is_subset_of(family.full));
  EXPECT_EQ(family.full.size(), 1000u);
  EXPECT_EQ(family.train.size() + family.valid_edges.size() + family.test_edges.size(), 1000u);

  fixtures::TempDir dir;
  kg::save_split_family(family, dir.path());
  const auto loaded = kg::load_split_family(dir.path());
  EXPECT_EQ(loaded.train, family.train);
  EXPECT_EQ(loaded.train_valid, family.train_valid);
  EXPECT_EQ(loaded.full, family.full);
  EXPECT_EQ(loaded.vocabulary.entities, family.vocabulary.entities);
}

TEST(KgStore, NameMapRejectsDuplicatesAndGaps) {
  fixtures::TempDir dir;
  dir.write("m.txt", "a\t0\nb\t0\n");
  EXPECT_EQ(kind_of([&] { kg::load_name_map(dir / "m.txt"); }), ErrorKind::kParse);
}
