#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "q2t/graph_encoding.hpp"
#include "q2t/link_predictor.hpp"
#include "q2t/query_ir.hpp"

namespace q2t::graphormer {

using kge::Matrix;
using kge::Vector;

struct EncoderConfig {
  std::size_t num_layers = 6;
  std::size_t width = 768;      // d1
  std::size_t num_heads = 12;
  std::size_t ffn_width = 768;  // d2
  double dropout = 0.1;
  encoding::EncodingOptions encoding;
  std::size_t negative_samples = 512;
  double label_smoothing = 0.6;
  double init_noise = 1e-2;  // off-identity noise of the negation transform
  std::uint64_t seed = 0;

  std::size_t num_buckets() const { return encoding::bucket_count(encoding); }
  std::size_t head_width() const { return width / num_heads; }
  void check() const;
};

// y = x * weight + bias, with `weight` stored in x out.
struct Linear {
  Matrix weight;
  Vector bias;
};

// linear -> GELU -> linear
struct Mlp {
  Linear first;
  Linear second;
};

struct LayerNorm {
  Vector gamma;
  Vector beta;
};

struct EncoderLayer {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  LayerNorm attention_norm;
  Linear ffn_in;
  Linear ffn_out;
  LayerNorm ffn_norm;
  Matrix bias_table;  // num_heads x num_buckets
};

// Trainable encoder state. The link predictor's tables are not part of it.
struct EncoderParams {
  Mlp proj;            // d0 -> d1 -> d1
  Matrix negation;     // d1 x d1, applied to negated relation nodes
  Vector head_token;   // g_h
  Vector relation_token;  // g_r
  Vector var_token;    // existential and free variables
  std::vector<EncoderLayer> layers;
  Mlp rev;             // d1 -> d1 -> d0, shared by g_h and g_r
};

EncoderParams init_params(const EncoderConfig& config, std::size_t kge_width);
// Same shapes, all zeros.
EncoderParams zeros_like(const EncoderParams& params);

struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

// Every parameter tensor in a fixed order; names look like "layer1.query.weight".
std::vector<TensorRef> tensors(EncoderParams& params);
std::size_t parameter_count(const EncoderParams& params);

double gelu(double x);
double gelu_derivative(double x);

// S^1: projected KGE rows for anchors and relation nodes (negated relation
// nodes additionally multiplied by the negation transform), trainable
// tokens for everything else.
Matrix embed_sequence(const encoding::SequenceInput& seq, const kge::KgeModel& kge,
                      const EncoderParams& params);

// Distance-biased multi-head attention, before the residual connection.
Matrix multi_head_attention(const Matrix& input, const encoding::IntMatrix& buckets,
                            const EncoderLayer& layer, const EncoderConfig& config);
// Feed-forward block, before the residual connection.
Matrix feed_forward(const Matrix& input, const EncoderLayer& layer);
// Full post-norm encoder layer in evaluation mode.
Matrix attention_layer(const Matrix& input, const encoding::IntMatrix& buckets,
                       const EncoderLayer& layer, const EncoderConfig& config);

// Attention probabilities of one head (rows sum to one).
Matrix attention_weights(const Matrix& input, const encoding::IntMatrix& buckets,
                         const EncoderLayer& layer, const EncoderConfig& config,
                         std::size_t head);

struct EncodedQuery {
  Vector head;      // g_h, width d1
  Vector relation;  // g_r, width d1
};

EncodedQuery encode(const encoding::SequenceInput& seq, const kge::KgeModel& kge,
                    const EncoderParams& params, const EncoderConfig& config);

// Scores of every entity as the tail of (MLP_rev(g_h), MLP_rev(g_r)).
Vector score_sequence(const encoding::SequenceInput& seq, const kge::KgeModel& kge,
                      const EncoderParams& params, const EncoderConfig& config);

struct ScoredQuery {
  Vector scores;
  std::vector<Vector> conjunct_scores;  // filled when there is more than one conjunct
};

// Multi-conjunct queries combine their conjunct scores by elementwise max.
ScoredQuery score_query(const query::DNFQuery& query, const kge::KgeModel& kge,
                        const EncoderParams& params, const EncoderConfig& config);

// Smoothed targets over `classes` entries, positive first:
// (1 - alpha) + alpha / classes, then alpha / classes for each negative.
std::vector<double> smoothed_labels(double alpha, std::size_t classes);

// Cross-entropy between smoothed labels and softmax(logits); logits[0] is
// the positive. Writes dL/dlogits when `grad` is non-empty.
double smoothed_cross_entropy(std::span<const double> logits, double alpha,
                              std::span<double> grad = {});

struct TrainingExample {
  kg::EntityId positive = 0;
  std::vector<kg::EntityId> negatives;
};

// Draws `count` negatives uniformly from entities not in `answers` (sorted).
// Returns every non-answer when there are no more than `count` of them.
std::vector<kg::EntityId> sample_negatives(std::size_t num_entities,
                                           std::span<const kg::EntityId> answers,
                                           std::size_t count, std::mt19937_64& rng);

// Loss of one single-conjunct example; accumulates parameter gradients into
// `grad` (and into `kge_grad` when non-null, for the unfrozen ablation).
// Dropout is active only when `dropout_rng` is non-null.
double example_loss(const encoding::SequenceInput& seq, const TrainingExample& example,
                    const kge::KgeModel& kge, const EncoderParams& params,
                    const EncoderConfig& config, EncoderParams* grad = nullptr,
                    kge::KgeGradient* kge_grad = nullptr, std::mt19937_64* dropout_rng = nullptr);

struct AdamConfig {
  double learning_rate = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // params and grads must list tensors in the same order and shapes.
  void step(std::span<const TensorRef> params, std::span<const TensorRef> grads);
  std::size_t steps() const { return step_; }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<Vector> first_;
  std::vector<Vector> second_;
};

}  // namespace q2t::graphormer
