#include "q2t/link_predictor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "q2t/checksum.hpp"
#include "q2t/error.hpp"
#include "q2t/key_value.hpp"
#include "q2t/metrics.hpp"
#include "raw_array.hpp"

namespace q2t::kge {

namespace {

class ComplEx final : public ScoringFunction {
 public:
  ScorerKind kind() const override { return ScorerKind::kComplEx; }

  void check_width(std::size_t width) const override {
    if (width == 0 || width % 2 != 0) {
      throw Error(ErrorKind::kShape, fmt::format("ComplEx needs an even width, got {}", width));
    }
  }

  // a * b
  static Vector mul(const Vector& a, const Vector& b) {
    const auto k = a.size() / 2;
    Vector out(a.size());
    out.head(k) = a.head(k).cwiseProduct(b.head(k)) - a.tail(k).cwiseProduct(b.tail(k));
    out.tail(k) = a.head(k).cwiseProduct(b.tail(k)) + a.tail(k).cwiseProduct(b.head(k));
    return out;
  }

  // conj(a) * b
  static Vector conj_mul(const Vector& a, const Vector& b) {
    const auto k = a.size() / 2;
    Vector out(a.size());
    out.head(k) = a.head(k).cwiseProduct(b.head(k)) + a.tail(k).cwiseProduct(b.tail(k));
    out.tail(k) = a.head(k).cwiseProduct(b.tail(k)) - a.tail(k).cwiseProduct(b.head(k));
    return out;
  }

  Vector compose(const Vector& head, const Vector& relation) const override {
    return mul(head, relation);
  }

  void compose_backward(const Vector& head, const Vector& relation, const Vector& grad,
                        Eigen::Ref<Vector> head_grad,
                        Eigen::Ref<Vector> relation_grad) const override {
    head_grad += conj_mul(relation, grad);
    relation_grad += conj_mul(head, grad);
  }

  Vector relation_context(const Vector& head, const Vector& tail) const override {
    return conj_mul(head, tail);
  }

  void relation_context_backward(const Vector& head, const Vector& tail, const Vector& grad,
                                 Eigen::Ref<Vector> head_grad,
                                 Eigen::Ref<Vector> tail_grad) const override {
    head_grad += conj_mul(grad, tail);
    tail_grad += mul(head, grad);
  }

  double n3(const Vector& x) const override {
    const auto k = x.size() / 2;
    const Vector modulus = (x.head(k).array().square() + x.tail(k).array().square()).sqrt();
    return modulus.array().cube().sum();
  }

  void n3_backward(const Vector& x, double scale, Eigen::Ref<Vector> grad) const override {
    const auto k = x.size() / 2;
    const Vector modulus = (x.head(k).array().square() + x.tail(k).array().square()).sqrt();
    grad.head(k) += 3.0 * scale * modulus.cwiseProduct(x.head(k));
    grad.tail(k) += 3.0 * scale * modulus.cwiseProduct(x.tail(k));
  }
};

class DistMult final : public ScoringFunction {
 public:
  ScorerKind kind() const override { return ScorerKind::kDistMult; }

  void check_width(std::size_t width) const override {
    if (width == 0) throw Error(ErrorKind::kShape, "DistMult needs a positive width");
  }

  Vector compose(const Vector& head, const Vector& relation) const override {
    return head.cwiseProduct(relation);
  }

  void compose_backward(const Vector& head, const Vector& relation, const Vector& grad,
                        Eigen::Ref<Vector> head_grad,
                        Eigen::Ref<Vector> relation_grad) const override {
    head_grad += relation.cwiseProduct(grad);
    relation_grad += head.cwiseProduct(grad);
  }

  Vector relation_context(const Vector& head, const Vector& tail) const override {
    return head.cwiseProduct(tail);
  }

  void relation_context_backward(const Vector& head, const Vector& tail, const Vector& grad,
                                 Eigen::Ref<Vector> head_grad,
                                 Eigen::Ref<Vector> tail_grad) const override {
    head_grad += tail.cwiseProduct(grad);
    tail_grad += head.cwiseProduct(grad);
  }

  double n3(const Vector& x) const override { return x.array().abs().cube().sum(); }

  void n3_backward(const Vector& x, double scale, Eigen::Ref<Vector> grad) const override {
    grad += 3.0 * scale * x.cwiseProduct(x.cwiseAbs());
  }
};

// In-place softmax of a row; returns log-sum-exp.
double softmax_in_place(Eigen::Ref<Vector> row) {
  const double max = row.maxCoeff();
  row = (row.array() - max).exp();
  const double sum = row.sum();
  row /= sum;
  return max + std::log(sum);
}

constexpr std::string_view kFormat = "q2t-kge-v1";

std::span<const double> flat(const Matrix& table) {
  return {table.data(), static_cast<std::size_t>(table.size())};
}

Matrix read_table(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                  Sha256& hasher) {
  const auto values = detail::read_f32(path, rows * cols, hasher);
  Matrix table(rows, cols);
  std::copy(values.begin(), values.end(), table.data());
  return table;
}

}  // namespace

std::string_view scorer_name(ScorerKind kind) {
  return kind == ScorerKind::kComplEx ? "complex" : "distmult";
}

ScorerKind parse_scorer(std::string_view name) {
  if (name == "complex" || name == "ComplEx") return ScorerKind::kComplEx;
  if (name == "distmult" || name == "DistMult") return ScorerKind::kDistMult;
  throw Error(ErrorKind::kConfig, fmt::format("unknown scorer '{}'", name));
}

const ScoringFunction& scoring_function(ScorerKind kind) {
  static const ComplEx complex;
  static const DistMult distmult;
  if (kind == ScorerKind::kComplEx) return complex;
  return distmult;
}

Vector score(const Vector& head, const Vector& relation, const Matrix& candidates,
             ScorerKind kind) {
  const auto& fn = scoring_function(kind);
  fn.check_width(static_cast<std::size_t>(head.size()));
  if (relation.size() != head.size() || candidates.cols() != head.size()) {
    throw Error(ErrorKind::kShape,
                fmt::format("score: width mismatch (head {}, relation {}, candidates {})",
                            head.size(), relation.size(), candidates.cols()));
  }
  return candidates * fn.compose(head, relation);
}

Vector KgeModel::score_tails(kg::EntityId head, kg::RelationId relation) const {
  const auto& fn = scoring_function(scorer);
  return entities * fn.compose(entities.row(head).transpose(), relations.row(relation).transpose());
}

void KgeModel::round_to_storage() {
  for (Eigen::Index i = 0; i < entities.size(); ++i) {
    entities.data()[i] = static_cast<float>(entities.data()[i]);
  }
  for (Eigen::Index i = 0; i < relations.size(); ++i) {
    relations.data()[i] = static_cast<float>(relations.data()[i]);
  }
}

KgeModel init_model(ScorerKind scorer, std::size_t num_entities, std::size_t num_relations,
                    std::size_t width, double scale, std::uint64_t seed) {
  scoring_function(scorer).check_width(width);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  KgeModel model;
  model.scorer = scorer;
  model.entities = Matrix(num_entities, width);
  model.relations = Matrix(num_relations, width);
  for (Eigen::Index i = 0; i < model.entities.size(); ++i) model.entities.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < model.relations.size(); ++i) model.relations.data()[i] = normal(rng);
  return model;
}

void PretrainConfig::check() const {
  if (lambda_rel < 0.0) throw Error(ErrorKind::kConfig, "lambda_rel must be non-negative");
  if (reg_weight < 0.0) throw Error(ErrorKind::kConfig, "reg_weight must be non-negative");
  if (learning_rate <= 0.0) throw Error(ErrorKind::kConfig, "learning_rate must be positive");
  if (batch_size == 0) throw Error(ErrorKind::kConfig, "batch_size must be positive");
  if (rank == 0) throw Error(ErrorKind::kConfig, "rank must be positive");
  if (init_scale <= 0.0) throw Error(ErrorKind::kConfig, "init_scale must be positive");
}

double objective(const KgeModel& model, std::span<const kg::Triple> batch, double lambda_rel,
                 double reg_weight, KgeGradient* gradient) {
  const auto& fn = scoring_function(model.scorer);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto width = static_cast<Eigen::Index>(model.width());
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  Matrix queries(n, width);
  Matrix contexts(n, width);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    const Vector h = model.entities.row(t.head).transpose();
    const Vector r = model.relations.row(t.relation).transpose();
    const Vector tail = model.entities.row(t.tail).transpose();
    queries.row(i) = fn.compose(h, r).transpose();
    contexts.row(i) = fn.relation_context(h, tail).transpose();
  }

  Matrix tail_probs = queries * model.entities.transpose();
  Matrix rel_probs = contexts * model.relations.transpose();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    const double tail_logit = tail_probs(i, t.tail);
    const double rel_logit = rel_probs(i, t.relation);
    Vector row = tail_probs.row(i).transpose();
    loss += softmax_in_place(row) - tail_logit;
    tail_probs.row(i) = row.transpose();
    if (lambda_rel > 0.0) {
      Vector rrow = rel_probs.row(i).transpose();
      loss += lambda_rel * (softmax_in_place(rrow) - rel_logit);
      rel_probs.row(i) = rrow.transpose();
    }
    if (reg_weight > 0.0) {
      loss += reg_weight * (fn.n3(model.entities.row(t.head).transpose()) +
                            fn.n3(model.relations.row(t.relation).transpose()) +
                            fn.n3(model.entities.row(t.tail).transpose()));
    }
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::kNumeric, fmt::format("non-finite KGE loss ({}) on a batch of {}", loss, n));
  }
  if (gradient == nullptr) return loss;

  // tail_probs / rel_probs now hold softmax rows; turn them into dL/dlogits.
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    tail_probs(i, t.tail) -= 1.0;
    rel_probs(i, t.relation) -= 1.0;
  }
  tail_probs *= inv_n;
  rel_probs *= lambda_rel * inv_n;

  gradient->entities = tail_probs.transpose() * queries;
  gradient->relations = Matrix::Zero(model.num_relations(), width);
  if (lambda_rel > 0.0) gradient->relations = rel_probs.transpose() * contexts;
  const Matrix query_grads = tail_probs * model.entities;
  const Matrix context_grads = lambda_rel > 0.0 ? Matrix(rel_probs * model.relations)
                                                : Matrix(Matrix::Zero(n, width));

  Vector dh(width), dr(width), dt(width);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    const Vector h = model.entities.row(t.head).transpose();
    const Vector r = model.relations.row(t.relation).transpose();
    const Vector tail = model.entities.row(t.tail).transpose();
    dh.setZero();
    dr.setZero();
    dt.setZero();
    fn.compose_backward(h, r, query_grads.row(i).transpose(), dh, dr);
    if (lambda_rel > 0.0) {
      fn.relation_context_backward(h, tail, context_grads.row(i).transpose(), dh, dt);
    }
    if (reg_weight > 0.0) {
      fn.n3_backward(h, reg_weight * inv_n, dh);
      fn.n3_backward(r, reg_weight * inv_n, dr);
      fn.n3_backward(tail, reg_weight * inv_n, dt);
    }
    gradient->entities.row(t.head) += dh.transpose();
    gradient->entities.row(t.tail) += dt.transpose();
    gradient->relations.row(t.relation) += dr.transpose();
  }
  return loss;
}

PretrainResult pretrain(const kg::KnowledgeGraph& kg, const PretrainConfig& config,
                        const EpochCallback& on_epoch) {
  config.check();
  if (kg.empty()) throw Error(ErrorKind::kConfig, "pretrain: knowledge graph has no triples");

  PretrainResult result;
  result.model = init_model(config.scorer, kg.num_entities(), kg.num_relations(), config.width(),
                            config.init_scale, config.seed);
  auto& model = result.model;
  Matrix entity_acc = Matrix::Zero(model.entities.rows(), model.entities.cols());
  Matrix relation_acc = Matrix::Zero(model.relations.rows(), model.relations.cols());

  std::vector<kg::Triple> order(kg.triples().begin(), kg.triples().end());
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  KgeGradient grad;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto count = std::min(config.batch_size, order.size() - start);
      const std::span<const kg::Triple> batch(order.data() + start, count);
      double loss = 0.0;
      try {
        loss = objective(model, batch, config.lambda_rel, config.reg_weight, &grad);
      } catch (const Error& e) {
        throw Error(ErrorKind::kNumeric,
                    fmt::format("pretrain aborted at epoch {}, batch {}: {}", epoch, batches, e.what()));
      }
      total += loss;
      ++batches;
      entity_acc.array() += grad.entities.array().square();
      relation_acc.array() += grad.relations.array().square();
      model.entities.array() -= config.learning_rate * grad.entities.array() /
                                (entity_acc.array().sqrt() + config.adagrad_epsilon);
      model.relations.array() -= config.learning_rate * grad.relations.array() /
                                 (relation_acc.array().sqrt() + config.adagrad_epsilon);
    }
    const double mean = total / static_cast<double>(batches);
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  if (!model.entities.allFinite() || !model.relations.allFinite()) {
    throw Error(ErrorKind::kNumeric, "pretrain produced non-finite embeddings");
  }
  model.round_to_storage();
  return result;
}

std::string content_hash(const KgeModel& model) {
  Sha256 hasher;
  hasher.update(detail::f32_bytes(flat(model.entities)));
  hasher.update(detail::f32_bytes(flat(model.relations)));
  return hasher.hex_digest();
}

void save_checkpoint(const KgeModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Sha256 hasher;
  detail::write_f32(flat(model.entities), dir / "entities.f32", hasher);
  detail::write_f32(flat(model.relations), dir / "relations.f32", hasher);
  KeyValueFile manifest;
  manifest.set("format", std::string(kFormat));
  manifest.set("scorer", std::string(scorer_name(model.scorer)));
  manifest.set("width", std::to_string(model.width()));
  manifest.set("num_entities", std::to_string(model.num_entities()));
  manifest.set("num_relations", std::to_string(model.num_relations()));
  manifest.set("dtype", "float32-le");
  manifest.set("entity_file", "entities.f32");
  manifest.set("relation_file", "relations.f32");
  manifest.set("sha256", hasher.hex_digest());
  manifest.write(dir / "manifest.txt");
}

KgeModel load_checkpoint(const std::filesystem::path& dir, std::optional<ExpectedShape> expected) {
  const auto manifest = KeyValueFile::read(dir / "manifest.txt");
  if (manifest.at("format") != kFormat) {
    throw Error(ErrorKind::kIntegrity,
                fmt::format("'{}' is not a KGE checkpoint (format '{}')", dir.string(),
                            manifest.at("format")));
  }
  const auto width = static_cast<std::size_t>(manifest.at_int("width"));
  const auto ne = static_cast<std::size_t>(manifest.at_int("num_entities"));
  const auto nr = static_cast<std::size_t>(manifest.at_int("num_relations"));
  if (expected && (expected->num_entities != ne || expected->num_relations != nr)) {
    throw Error(ErrorKind::kShape,
                fmt::format("checkpoint vocabulary {}x{} does not match the graph's {}x{}", ne, nr,
                            expected->num_entities, expected->num_relations));
  }
  KgeModel model;
  model.scorer = parse_scorer(manifest.at("scorer"));
  scoring_function(model.scorer).check_width(width);
  Sha256 hasher;
  model.entities = read_table(dir / manifest.at("entity_file"), ne, width, hasher);
  model.relations = read_table(dir / manifest.at("relation_file"), nr, width, hasher);
  const auto digest = hasher.hex_digest();
  if (digest != manifest.at("sha256")) {
    throw Error(ErrorKind::kIntegrity,
                fmt::format("checkpoint '{}' hash mismatch: manifest {}, content {}", dir.string(),
                            manifest.at("sha256"), digest));
  }
  return model;
}

LinkPredictionMetrics eval_link_prediction(const KgeModel& model,
                                           const kg::GraphIndex& filter_index,
                                           std::span<const kg::Triple> test_triples) {
  RankAccumulator acc;
  std::vector<double> scores(model.num_entities());
  for (const auto& t : test_triples) {
    const Vector s = model.score_tails(t.head, t.relation);
    std::copy(s.data(), s.data() + s.size(), scores.begin());
    acc.add(filtered_rank(scores, t.tail, filter_index.tails(t.head, t.relation)));
  }
  return {acc.mrr(), acc.hit_rate(acc.hits1), acc.hit_rate(acc.hits3), acc.hit_rate(acc.hits10),
          acc.count};
}

}  // namespace q2t::kge
