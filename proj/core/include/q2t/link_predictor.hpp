#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "q2t/kg_store.hpp"

namespace q2t::kge {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ScorerKind { kComplEx, kDistMult };

std::string_view scorer_name(ScorerKind kind);
ScorerKind parse_scorer(std::string_view name);

// A triple scorer that is linear in the tail embedding:
//   score(h, r, t) = <compose(h, r), t> = <r, relation_context(h, t)>.
// ComplEx vectors store the real parts followed by the imaginary parts.
class ScoringFunction {
 public:
  virtual ~ScoringFunction() = default;

  virtual ScorerKind kind() const = 0;
  // Throws Error(kShape) when `width` is not usable by this scorer.
  virtual void check_width(std::size_t width) const = 0;

  virtual Vector compose(const Vector& head, const Vector& relation) const = 0;
  // Backpropagates dL/d(compose) into dL/dhead and dL/drelation (accumulated).
  virtual void compose_backward(const Vector& head, const Vector& relation, const Vector& grad,
                                Eigen::Ref<Vector> head_grad,
                                Eigen::Ref<Vector> relation_grad) const = 0;

  virtual Vector relation_context(const Vector& head, const Vector& tail) const = 0;
  virtual void relation_context_backward(const Vector& head, const Vector& tail,
                                         const Vector& grad, Eigen::Ref<Vector> head_grad,
                                         Eigen::Ref<Vector> tail_grad) const = 0;

  // Sum over factors of the cubic (N3) norm, and its gradient.
  virtual double n3(const Vector& x) const = 0;
  virtual void n3_backward(const Vector& x, double scale, Eigen::Ref<Vector> grad) const = 0;
};

const ScoringFunction& scoring_function(ScorerKind kind);

// score(h, r, t) for each candidate row.
Vector score(const Vector& head, const Vector& relation, const Matrix& candidates,
             ScorerKind kind);

struct KgeModel {
  ScorerKind scorer = ScorerKind::kComplEx;
  Matrix entities;   // |V| x width
  Matrix relations;  // |R| x width

  std::size_t width() const { return static_cast<std::size_t>(entities.cols()); }
  std::size_t num_entities() const { return static_cast<std::size_t>(entities.rows()); }
  std::size_t num_relations() const { return static_cast<std::size_t>(relations.rows()); }

  // Scores of every entity as the tail of (head, relation).
  Vector score_tails(kg::EntityId head, kg::RelationId relation) const;
  // Rounds every value to float32, the checkpoint storage precision.
  void round_to_storage();
};

// Zero-mean gaussian tables with standard deviation `scale`.
KgeModel init_model(ScorerKind scorer, std::size_t num_entities, std::size_t num_relations,
                    std::size_t width, double scale, std::uint64_t seed);

struct PretrainConfig {
  ScorerKind scorer = ScorerKind::kComplEx;
  // ComplEx width is 2 * rank.
  std::size_t rank = 1000;
  double lambda_rel = 0.5;
  double learning_rate = 0.1;
  std::size_t batch_size = 1000;
  std::size_t epochs = 100;
  double reg_weight = 1e-3;
  double init_scale = 1e-2;
  double adagrad_epsilon = 1e-10;
  std::uint64_t seed = 0;

  std::size_t width() const { return scorer == ScorerKind::kComplEx ? 2 * rank : rank; }
  void check() const;
};

struct KgeGradient {
  Matrix entities;
  Matrix relations;
};

// Mean over the batch of
//   -[log P(t|h,r) + lambda log P(r|h,t)]  (full softmax over entities / relations)
// plus reg_weight * N3(h, r, t) / batch. Fills `gradient` when non-null.
double objective(const KgeModel& model, std::span<const kg::Triple> batch, double lambda_rel,
                 double reg_weight, KgeGradient* gradient = nullptr);

struct PretrainResult {
  KgeModel model;
  std::vector<double> epoch_losses;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// Adagrad on `objective`; the returned tables are rounded to float32.
PretrainResult pretrain(const kg::KnowledgeGraph& kg, const PretrainConfig& config,
                        const EpochCallback& on_epoch = {});

// Directory with manifest.txt, entities.f32 and relations.f32 (raw
// little-endian float32, row-major).
void save_checkpoint(const KgeModel& model, const std::filesystem::path& dir);

struct ExpectedShape {
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
};
KgeModel load_checkpoint(const std::filesystem::path& dir,
                         std::optional<ExpectedShape> expected = std::nullopt);

// SHA-256 over the float32 bytes of the entity table then the relation table.
std::string content_hash(const KgeModel& model);

struct LinkPredictionMetrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t count = 0;
};

// Filtered tail ranking: other known tails of (h, r) in `filter_index` are
// excluded; ties are optimistic.
LinkPredictionMetrics eval_link_prediction(const KgeModel& model,
                                           const kg::GraphIndex& filter_index,
                                           std::span<const kg::Triple> test_triples);

}  // namespace q2t::kge
