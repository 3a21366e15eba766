#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "q2t/encoder_checkpoint.hpp"
#include "q2t/error.hpp"
#include "q2t/query_graphormer.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"
#include "support/tiny_model.hpp"

using namespace q2t;
using namespace q2t::graphormer;
using encoding::EncodingMode;
using query::QueryType;

namespace {

encoding::SequenceInput sequence_of(QueryType type, const EncoderConfig& cfg, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  return encoding::encode_graph(fixtures::random_binding(type, 30, 6, rng).conjuncts[0], cfg.encoding);
}

EncoderLayer identity_layer(std::size_t d, std::size_t buckets) {
  EncoderLayer l;
  for (auto* lin : {&l.query, &l.key, &l.value, &l.output, &l.ffn_in, &l.ffn_out}) {
    lin->weight = Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    lin->bias = Vector::Zero(static_cast<Eigen::Index>(d));
  }
  l.attention_norm = {Vector::Ones(static_cast<Eigen::Index>(d)), Vector::Zero(static_cast<Eigen::Index>(d))};
  l.ffn_norm = l.attention_norm;
  l.bias_table = Matrix::Zero(1, static_cast<Eigen::Index>(buckets));
  return l;
}

Linear pad(const Linear& l, Eigen::Index in, Eigen::Index out) {
  Linear p{Matrix::Zero(in, out), Vector::Zero(out)};
  p.weight.topLeftCorner(l.weight.rows(), l.weight.cols()) = l.weight;
  p.bias.head(l.bias.size()) = l.bias;
  return p;
}

struct Example {
  encoding::SequenceInput seq;
  TrainingExample target;
};

std::vector<Example> gradient_examples(const EncoderConfig& cfg) {
  std::vector<Example> out;
  std::mt19937_64 rng(4);
  for (auto type : {QueryType::k2in, QueryType::kPi, QueryType::k3p, QueryType::kPni}) {
    Example e{sequence_of(type, cfg, static_cast<std::uint64_t>(type) + 3), {}};
    const std::vector<kg::EntityId> answers{3, 9};
    e.target.positive = 9;
    e.target.negatives = sample_negatives(30, answers, cfg.negative_samples, rng);
    out.push_back(std::move(e));
  }
  return out;
}

double total_loss(const std::vector<Example>& examples, const kge::KgeModel& kge,
                  const EncoderParams& params, const EncoderConfig& cfg, EncoderParams* grad,
                  kge::KgeGradient* kge_grad, std::uint64_t dropout_seed) {
  std::mt19937_64 dropout(dropout_seed);
  double loss = 0.0;
  for (const auto& e : examples) {
    loss += example_loss(e.seq, e.target, kge, params, cfg, grad, kge_grad,
                         cfg.dropout > 0.0 ? &dropout : nullptr);
  }
  return loss;
}

double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

void gradient_check(const EncoderConfig& cfg) {
  const auto kge = fixtures::tiny_kge();
  auto params = fixtures::perturbed_params(cfg, kge.width(), 5);
  const auto examples = gradient_examples(cfg);
  auto grad = zeros_like(params);
  kge::KgeGradient kge_grad{kge::Matrix::Zero(kge.entities.rows(), kge.entities.cols()),
                            kge::Matrix::Zero(kge.relations.rows(), kge.relations.cols())};
  total_loss(examples, kge, params, cfg, &grad, &kge_grad, 21);
  const double eps = 1e-5;
  auto list = tensors(params);
  auto grads = tensors(grad);
  for (std::size_t t = 0; t < list.size(); ++t) {
    Vector numeric(static_cast<Eigen::Index>(list[t].size));
    for (std::size_t i = 0; i < list[t].size; ++i) {
      const double saved = list[t].data[i];
      list[t].data[i] = saved + eps;
      const double up = total_loss(examples, kge, params, cfg, nullptr, nullptr, 21);
      list[t].data[i] = saved - eps;
      const double down = total_loss(examples, kge, params, cfg, nullptr, nullptr, 21);
      list[t].data[i] = saved;
      numeric(static_cast<Eigen::Index>(i)) = (up - down) / (2 * eps);
    }
    const Eigen::Map<const Vector> analytic(grads[t].data, static_cast<Eigen::Index>(grads[t].size));
    // softmax is shift-invariant per row, so key biases get no gradient
    if (list[t].name.ends_with("key.bias")) {
      EXPECT_LT(analytic.norm(), 1e-8) << list[t].name;
      EXPECT_LT(numeric.norm(), 1e-8) << list[t].name;
      continue;
    }
    EXPECT_LT(relative_error(analytic, numeric), 1e-4) << list[t].name;
    EXPECT_GT(analytic.norm(), 1e-6) << list[t].name;
  }
  auto table = kge;
  for (auto* m : {&table.entities, &table.relations}) {
    const auto& g = m == &table.entities ? kge_grad.entities : kge_grad.relations;
    Vector numeric(m->size());
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const double saved = m->data()[i];
      m->data()[i] = saved + eps;
      const double up = total_loss(examples, table, params, cfg, nullptr, nullptr, 21);
      m->data()[i] = saved - eps;
      const double down = total_loss(examples, table, params, cfg, nullptr, nullptr, 21);
      m->data()[i] = saved;
      numeric(i) = (up - down) / (2 * eps);
    }
    EXPECT_LT(relative_error(Eigen::Map<const Vector>(g.data(), g.size()), numeric), 1e-4);
  }
}

}  // namespace

TEST(Graphormer, GradientCheckDirected) { gradient_check(fixtures::tiny_config()); }

TEST(Graphormer, GradientCheckAdjacencyMaskWithDropout) {
  auto cfg = fixtures::tiny_config(EncodingMode::kAdjacencyMask);
  cfg.dropout = 0.2;
  gradient_check(cfg);
}

TEST(Graphormer, GeluDerivative) {
  for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
    EXPECT_NEAR(gelu_derivative(x), (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6, 1e-8);
  }
  EXPECT_DOUBLE_EQ(gelu(0.0), 0.0);
}

TEST(Graphormer, AttentionHandCase) {
  EncoderConfig cfg;
  cfg.width = 2;
  cfg.num_heads = 1;
  cfg.ffn_width = 2;
  cfg.encoding.mode = EncodingMode::kNone;
  const auto layer = identity_layer(2, cfg.num_buckets());
  Matrix x(3, 2);
  x << 1, 0, 0, 1, 1, 1;
  encoding::IntMatrix buckets(3, 3, 0);
  // Closed form: s_ij = <x_i, x_j> / sqrt(2), row softmax, weighted sum of x.
  Matrix expected(3, 2);
  const double dots[3][3] = {{1, 0, 1}, {0, 1, 1}, {1, 1, 2}};
  for (int i = 0; i < 3; ++i) {
    double w[3], z = 0;
    for (int j = 0; j < 3; ++j) z += w[j] = std::exp(dots[i][j] / std::sqrt(2.0));
    expected.row(i).setZero();
    for (int j = 0; j < 3; ++j) expected.row(i) += w[j] / z * x.row(j);
  }
  EXPECT_LT((multi_head_attention(x, buckets, layer, cfg) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Graphormer, UniformAttentionAndRowSums) {
  auto cfg = fixtures::tiny_config();
  const auto params = fixtures::perturbed_params(cfg, 8, 3);
  auto layer = params.layers[0];
  layer.bias_table.setConstant(0.4);
  const Matrix same = Matrix::Ones(5, 16) * 0.3;
  const auto seq = sequence_of(QueryType::k1p, cfg);
  const auto w = attention_weights(same, seq.buckets, layer, cfg, 1);
  EXPECT_LT((w.array() - 0.2).abs().maxCoeff(), 1e-12);

  const auto kge = fixtures::tiny_kge();
  for (auto type : query::kAllTemplates) {
    std::mt19937_64 rng(2);
    const auto q = fixtures::random_binding(type, 30, 6, rng);
    for (const auto& g : q.conjuncts) {
      const auto s = encoding::encode_graph(g, cfg.encoding);
      const auto h = embed_sequence(s, kge, params);
      const auto a = attention_weights(h, s.buckets, params.layers[0], cfg, 0);
      EXPECT_LT((a.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
    }
    EXPECT_TRUE(score_query(q, kge, params, cfg).scores.allFinite());
  }
}

TEST(Graphormer, SingleNodeAttendsToItself) {
  auto cfg = fixtures::tiny_config(EncodingMode::kNone);
  const auto params = fixtures::perturbed_params(cfg, 8, 4);
  const Matrix x = Matrix::Random(1, 16);
  const encoding::IntMatrix buckets(1, 1, 0);
  EXPECT_DOUBLE_EQ(attention_weights(x, buckets, params.layers[0], cfg, 0)(0, 0), 1.0);
  const auto& l = params.layers[0];
  const Matrix value_path = ((x * l.value.weight).rowwise() + l.value.bias.transpose()) * l.output.weight;
  const Matrix expected = value_path.rowwise() + l.output.bias.transpose();
  EXPECT_LT((multi_head_attention(x, buckets, l, cfg) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Graphormer, EmbedSequenceRows) {
  const auto cfg = fixtures::tiny_config();
  const auto kge = fixtures::tiny_kge();
  const auto params = fixtures::perturbed_params(cfg, 8, 6);
  const auto seq = sequence_of(QueryType::k1p, cfg);
  const auto h = embed_sequence(seq, kge, params);
  ASSERT_EQ(seq.sequence[3].kind, encoding::AugNodeKind::kRelationNode);
  const Vector r = kge.relations.row(seq.sequence[3].id).transpose();
  const Vector hidden = (params.proj.first.weight.transpose() * r + params.proj.first.bias)
                            .unaryExpr([](double v) { return gelu(v); });
  const Vector expected = params.proj.second.weight.transpose() * hidden + params.proj.second.bias;
  EXPECT_LT((h.row(3).transpose() - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(h.row(0).transpose(), params.head_token);
  EXPECT_EQ(h.row(1).transpose(), params.relation_token);
  EXPECT_EQ(h.row(4).transpose(), params.var_token);
  EXPECT_EQ(embed_sequence(seq, kge, params), h);

  const auto neg = sequence_of(QueryType::k2in, cfg);
  auto plain = params;
  plain.negation.setIdentity();
  const auto a = embed_sequence(neg, kge, params);
  const auto b = embed_sequence(neg, kge, plain);
  int changed = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) changed += (a.row(i) - b.row(i)).norm() > 0 ? 1 : 0;
  EXPECT_EQ(changed, 1);

  auto bad = seq;
  bad.sequence[2].id = 1000;
  EXPECT_THROW(embed_sequence(bad, kge, params), Error);
}

TEST(Graphormer, PermutationInvariance) {
  const auto cfg = fixtures::tiny_config();
  const auto kge = fixtures::tiny_kge();
  const auto params = fixtures::perturbed_params(cfg, 8, 7);
  std::mt19937_64 rng(8);
  for (auto type : query::kAllTemplates) {
    const auto q = fixtures::random_binding(type, 30, 6, rng);
    const auto seq = encoding::encode_graph(q.conjuncts[0], cfg.encoding);
    const auto base = encode(seq, kge, params, cfg);
    std::vector<std::size_t> order(seq.length());
    std::iota(order.begin(), order.end(), 0);
    for (int k = 0; k < 10; ++k) {
      std::shuffle(order.begin() + 2, order.end(), rng);
      const auto out = encode(encoding::permute_sequence(seq, order), kge, params, cfg);
      EXPECT_LT((out.head - base.head).cwiseAbs().maxCoeff(), 1e-5);
      EXPECT_LT((out.relation - base.relation).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(Graphormer, ZeroPaddingPreservesSublayers) {
  auto small = fixtures::tiny_config();
  small.width = 8;
  small.ffn_width = 8;
  auto big = small;
  big.width = 16;
  big.ffn_width = 16;
  big.num_heads = 4;
  const auto params = fixtures::perturbed_params(small, 8, 9);
  const auto& l = params.layers[0];
  EncoderLayer p;
  p.query = pad(l.query, 16, 16);
  p.key = pad(l.key, 16, 16);
  p.value = pad(l.value, 16, 16);
  p.output = pad(l.output, 16, 16);
  p.ffn_in = pad(l.ffn_in, 16, 16);
  p.ffn_out = pad(l.ffn_out, 16, 16);
  p.bias_table = Matrix::Zero(4, l.bias_table.cols());
  p.bias_table.topRows(2) = l.bias_table;
  const auto seq = sequence_of(QueryType::kIp, small);
  const Matrix x = Matrix::Random(static_cast<Eigen::Index>(seq.length()), 8);
  Matrix xp = Matrix::Zero(x.rows(), 16);
  xp.leftCols(8) = x;
  const auto a = multi_head_attention(x, seq.buckets, l, small);
  const auto ap = multi_head_attention(xp, seq.buckets, p, big);
  EXPECT_LT((ap.leftCols(8) - a).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(ap.rightCols(8).cwiseAbs().maxCoeff(), 1e-12);
  const auto f = feed_forward(x, l);
  const auto fp = feed_forward(xp, p);
  EXPECT_LT((fp.leftCols(8) - f).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(fp.rightCols(8).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Graphormer, UnionTakesElementwiseMax) {
  const auto cfg = fixtures::tiny_config();
  const auto kge = fixtures::tiny_kge();
  const auto params = fixtures::perturbed_params(cfg, 8, 10);
  const auto q = query::build_from_template(QueryType::k2u, std::vector<kg::EntityId>{1, 2},
                                            std::vector<kg::RelationId>{3, 4});
  const auto scored = score_query(q, kge, params, cfg);
  ASSERT_EQ(scored.conjunct_scores.size(), 2u);
  const Vector expected = scored.conjunct_scores[0].cwiseMax(scored.conjunct_scores[1]);
  EXPECT_EQ(scored.scores, expected);
  const auto c0 = query::build_from_template(QueryType::k1p, std::vector<kg::EntityId>{1}, std::vector<kg::RelationId>{3});
  EXPECT_EQ(score_query(c0, kge, params, cfg).scores, scored.conjunct_scores[0]);
  EXPECT_TRUE(score_query(c0, kge, params, cfg).conjunct_scores.empty());
}

TEST(Graphormer, LabelSmoothing) {
  const auto labels = smoothed_labels(0.4, 5);
  EXPECT_NEAR(labels[0], 0.68, 1e-15);
  for (std::size_t k = 1; k < 5; ++k) EXPECT_NEAR(labels[k], 0.08, 1e-15);
  EXPECT_NEAR(std::accumulate(labels.begin(), labels.end(), 0.0), 1.0, 1e-15);
  EXPECT_THROW(smoothed_labels(1.0, 5), Error);
  EXPECT_THROW(smoothed_labels(-0.1, 5), Error);

  const std::vector<double> logits{1.5, -0.2, 0.3, 2.0, 0.0};
  double z = 0;
  for (double l : logits) z += std::exp(l);
  EXPECT_NEAR(smoothed_cross_entropy(logits, 0.0), std::log(z) - logits[0], 1e-12);
  const std::vector<double> flat(7, 0.9);
  for (double a : {0.0, 0.3, 0.6}) EXPECT_NEAR(smoothed_cross_entropy(flat, a), std::log(7.0), 1e-12);
}

TEST(Graphormer, NegativeSampling) {
  std::mt19937_64 rng(1);
  const std::vector<kg::EntityId> answers{2, 5, 7};
  const auto neg = sample_negatives(50, answers, 200, rng);
  EXPECT_EQ(neg.size(), 47u);
  const auto some = sample_negatives(1000, answers, 100, rng);
  EXPECT_EQ(some.size(), 100u);
  for (auto e : some) EXPECT_FALSE(std::binary_search(answers.begin(), answers.end(), e));
}

TEST(Graphormer, AdamStepMovesAgainstGradient) {
  Vector x = Vector::Constant(3, 1.0);
  Vector g(3);
  g << 2.0, -3.0, 0.0;
  std::vector<TensorRef> p{{"x", x.data(), 3, 3, 1}}, gr{{"g", g.data(), 3, 3, 1}};
  Adam adam({.learning_rate = 0.1});
  adam.step(p, gr);
  EXPECT_NEAR(x(0), 0.9, 1e-6);
  EXPECT_NEAR(x(1), 1.1, 1e-6);
  EXPECT_DOUBLE_EQ(x(2), 1.0);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Graphormer, ConfigChecks) {
  EncoderConfig cfg;
  cfg.width = 10;
  cfg.num_heads = 3;
  EXPECT_THROW(cfg.check(), Error);
  EncoderConfig ok;
  EXPECT_NO_THROW(ok.check());
  EXPECT_EQ(ok.num_layers, 6u);
  EXPECT_EQ(ok.width, 768u);
  EXPECT_EQ(ok.num_heads, 12u);
}

TEST(Graphormer, EncoderCheckpointRoundTrip) {
  const auto cfg = fixtures::tiny_config(EncodingMode::kUndirectedDistance);
  const auto kge = fixtures::tiny_kge();
  auto params = fixtures::perturbed_params(cfg, 8, 11);
  round_to_storage(params);
  fixtures::TempDir dir;
  save_encoder({cfg, params, 8, kge::content_hash(kge)}, dir.path());
  const auto loaded = load_encoder(dir.path(), kge::content_hash(kge));
  EXPECT_EQ(loaded.config.encoding.mode, EncodingMode::kUndirectedDistance);
  EXPECT_EQ(loaded.config.width, cfg.width);
  auto a = params;
  auto b = loaded.params;
  const auto la = tensors(a), lb = tensors(b);
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t t = 0; t < la.size(); ++t) {
    EXPECT_TRUE(std::equal(la[t].data, la[t].data + la[t].size, lb[t].data)) << la[t].name;
  }
  try {
    load_encoder(dir.path(), std::string(64, 'a'));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIntegrity);
  }
}
