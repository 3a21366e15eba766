#include <random>

#include <benchmark/benchmark.h>

#include "q2t/graph_encoding.hpp"
#include "q2t/link_predictor.hpp"
#include "q2t/query_graphormer.hpp"
#include "q2t/symbolic_engine.hpp"
#include "q2t/synthetic.hpp"

using namespace q2t;
using query::QueryType;

namespace {

const kg::SplitFamily& family() {
  static const auto f = [] {
    kg::SyntheticSpec spec;
    spec.num_entities = 2000;
    spec.num_relations = 20;
    spec.num_triples = 20000;
    spec.seed = 1;
    return kg::make_synthetic_family(spec);
  }();
  return f;
}

const kg::GraphIndex& index() {
  static const kg::GraphIndex idx(family().train);
  return idx;
}

std::vector<query::DNFQuery> sampled(QueryType type, std::size_t count) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(type) + 7);
  std::vector<query::DNFQuery> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(symbolic::sample_query(type, index(), rng));
  return out;
}

graphormer::EncoderConfig encoder_config(std::size_t width) {
  graphormer::EncoderConfig c;
  c.num_layers = 2;
  c.width = width;
  c.num_heads = 4;
  c.ffn_width = width;
  c.dropout = 0.0;
  c.negative_samples = 128;
  return c;
}

const kge::KgeModel& model() {
  static const auto m = kge::init_model(kge::ScorerKind::kComplEx, family().train.num_entities(),
                                        family().train.num_relations(), 64, 0.1, 3);
  return m;
}

void BM_AnswerDnf(benchmark::State& state) {
  const auto type = query::kAllTemplates[static_cast<std::size_t>(state.range(0))];
  const auto queries = sampled(type, 64);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(symbolic::answer_dnf(queries[i++ % queries.size()], index()));
  }
  state.SetLabel(std::string(query::query_type_name(type)));
}
BENCHMARK(BM_AnswerDnf)->DenseRange(0, 13);

void BM_EncodeGraph(benchmark::State& state) {
  const auto q = sampled(QueryType::kPni, 1).front();
  const encoding::EncodingOptions options;
  for (auto _ : state) benchmark::DoNotOptimize(encoding::encode_graph(q.conjuncts[0], options));
}
BENCHMARK(BM_EncodeGraph);

void BM_ScoreQuery(benchmark::State& state) {
  const auto cfg = encoder_config(static_cast<std::size_t>(state.range(0)));
  const auto params = graphormer::init_params(cfg, model().width());
  const auto q = sampled(QueryType::kIp, 1).front();
  for (auto _ : state) benchmark::DoNotOptimize(graphormer::score_query(q, model(), params, cfg));
}
BENCHMARK(BM_ScoreQuery)->Arg(32)->Arg(128);

void BM_ExampleLossWithGradient(benchmark::State& state) {
  const auto cfg = encoder_config(static_cast<std::size_t>(state.range(0)));
  const auto params = graphormer::init_params(cfg, model().width());
  auto grad = graphormer::zeros_like(params);
  const auto q = sampled(QueryType::k3i, 1).front();
  const auto seq = encoding::encode_graph(q.conjuncts[0], cfg.encoding);
  std::mt19937_64 rng(5);
  graphormer::TrainingExample ex;
  ex.positive = symbolic::answer_dnf(q, index()).front();
  ex.negatives = graphormer::sample_negatives(model().num_entities(), std::vector<kg::EntityId>{ex.positive},
                                              cfg.negative_samples, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(graphormer::example_loss(seq, ex, model(), params, cfg, &grad, nullptr, nullptr));
  }
}
BENCHMARK(BM_ExampleLossWithGradient)->Arg(32)->Arg(128);

void BM_PretrainObjectiveBatch(benchmark::State& state) {
  const auto batch = family().train.triples().subspan(0, static_cast<std::size_t>(state.range(0)));
  auto m = model();
  kge::KgeGradient g{kge::Matrix::Zero(m.entities.rows(), m.entities.cols()),
                     kge::Matrix::Zero(m.relations.rows(), m.relations.cols())};
  for (auto _ : state) benchmark::DoNotOptimize(kge::objective(m, batch, 0.5, 1e-3, &g));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PretrainObjectiveBatch)->Arg(100)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
