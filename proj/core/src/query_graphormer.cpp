#include "q2t/query_graphormer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "q2t/error.hpp"

namespace q2t::graphormer {

using encoding::AugNodeKind;
using encoding::IntMatrix;
using encoding::SequenceInput;

namespace {

constexpr double kLayerNormEpsilon = 1e-5;

void normal_fill(Matrix& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
}

Linear make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  Linear l;
  l.weight = Matrix(in, out);
  normal_fill(l.weight, std::sqrt(2.0 / static_cast<double>(in + out)), rng);
  l.bias = Vector::Zero(static_cast<Eigen::Index>(out));
  return l;
}

LayerNorm make_norm(std::size_t width) {
  return {Vector::Ones(static_cast<Eigen::Index>(width)),
          Vector::Zero(static_cast<Eigen::Index>(width))};
}

Vector make_token(std::size_t width, std::mt19937_64& rng) {
  Matrix m(static_cast<Eigen::Index>(width), 1);
  normal_fill(m, 1.0, rng);
  return m.col(0);
}

Matrix apply(const Linear& l, const Matrix& x) {
  Matrix y = x * l.weight;
  y.rowwise() += l.bias.transpose();
  return y;
}

// Accumulates weight/bias gradients, returns dL/dx.
Matrix apply_backward(const Linear& l, const Matrix& x, const Matrix& dy, Linear& grad) {
  grad.weight.noalias() += x.transpose() * dy;
  grad.bias += dy.colwise().sum().transpose();
  return dy * l.weight.transpose();
}

Matrix gelu(const Matrix& x) { return x.unaryExpr([](double v) { return graphormer::gelu(v); }); }

struct MlpCache {
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
};

Matrix mlp_forward(const Linear& first, const Linear& second, const Matrix& x, MlpCache& cache) {
  cache.input = x;
  cache.hidden_pre = apply(first, x);
  cache.hidden = gelu(cache.hidden_pre);
  return apply(second, cache.hidden);
}

Matrix mlp_backward(const Linear& first, const Linear& second, const MlpCache& cache,
                    const Matrix& dy, Linear& first_grad, Linear& second_grad) {
  Matrix dh = apply_backward(second, cache.hidden, dy, second_grad);
  dh.array() *= cache.hidden_pre.unaryExpr([](double v) { return gelu_derivative(v); }).array();
  return apply_backward(first, cache.input, dh, first_grad);
}

struct NormCache {
  Matrix normalized;
  Vector inv_std;
};

Matrix norm_forward(const LayerNorm& norm, const Matrix& x, NormCache& cache) {
  const auto rows = x.rows();
  const auto cols = static_cast<double>(x.cols());
  cache.normalized.resize(rows, x.cols());
  cache.inv_std.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / cols;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    cache.inv_std(i) = inv;
    cache.normalized.row(i) = (x.row(i).array() - mean) * inv;
  }
  Matrix y = cache.normalized.array().rowwise() * norm.gamma.transpose().array();
  y.rowwise() += norm.beta.transpose();
  return y;
}

Matrix norm_backward(const LayerNorm& norm, const NormCache& cache, const Matrix& dy,
                     LayerNorm& grad) {
  grad.gamma += (dy.array() * cache.normalized.array()).colwise().sum().transpose().matrix();
  grad.beta += dy.colwise().sum().transpose();
  const Matrix dnorm = dy.array().rowwise() * norm.gamma.transpose().array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dnorm.row(i).mean();
    const double mean_dx = dnorm.row(i).dot(cache.normalized.row(i)) / static_cast<double>(dy.cols());
    dx.row(i) = cache.inv_std(i) *
                (dnorm.row(i).array() - mean_d - cache.normalized.row(i).array() * mean_dx);
  }
  return dx;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64* rng) {
  if (rng == nullptr || rate <= 0.0) return {};
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : 0.0;
  return mask;
}

Matrix masked(const Matrix& x, const Matrix& mask) {
  if (mask.size() == 0) return x;
  return x.cwiseProduct(mask);
}

struct AttentionCache {
  Matrix input;
  Matrix query;
  Matrix key;
  Matrix value;
  std::vector<Matrix> probs;
  Matrix context;
};

Matrix head_bias(const EncoderLayer& layer, const IntMatrix& buckets,
                 const EncoderConfig& config, std::size_t head) {
  const auto m = static_cast<Eigen::Index>(buckets.rows);
  Matrix bias(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const int b = buckets(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      bias(i, j) = encoding::is_masked_bucket(config.encoding, b)
                       ? -std::numeric_limits<double>::infinity()
                       : layer.bias_table(static_cast<Eigen::Index>(head), b);
    }
  }
  return bias;
}

void softmax_rows(Matrix& scores) {
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double max = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - max).exp();
    scores.row(i) /= scores.row(i).sum();
  }
}

void check_buckets(const IntMatrix& buckets, const Matrix& input, const EncoderLayer& layer) {
  if (buckets.rows != static_cast<std::size_t>(input.rows()) || buckets.cols != buckets.rows) {
    throw Error(ErrorKind::kShape, "bucket matrix does not match the sequence length");
  }
  for (int b : buckets.values) {
    if (b < 0 || b >= layer.bias_table.cols()) {
      throw Error(ErrorKind::kShape, fmt::format("bucket {} outside [0, {})", b, layer.bias_table.cols()));
    }
  }
}

Matrix attention_forward(const Matrix& x, const IntMatrix& buckets, const EncoderLayer& layer,
                         const EncoderConfig& config, AttentionCache& cache) {
  check_buckets(buckets, x, layer);
  const auto heads = config.num_heads;
  const auto dh = static_cast<Eigen::Index>(config.head_width());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.input = x;
  cache.query = apply(layer.query, x);
  cache.key = apply(layer.key, x);
  cache.value = apply(layer.value, x);
  cache.context = Matrix(x.rows(), x.cols());
  cache.probs.resize(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto c0 = static_cast<Eigen::Index>(h) * dh;
    Matrix scores = cache.query.middleCols(c0, dh) * cache.key.middleCols(c0, dh).transpose() * scale;
    scores += head_bias(layer, buckets, config, h);
    softmax_rows(scores);
    cache.context.middleCols(c0, dh) = scores * cache.value.middleCols(c0, dh);
    cache.probs[h] = std::move(scores);
  }
  return apply(layer.output, cache.context);
}

Matrix attention_backward(const EncoderLayer& layer, const IntMatrix& buckets,
                          const EncoderConfig& config, const AttentionCache& cache,
                          const Matrix& dy, EncoderLayer& grad) {
  const auto heads = config.num_heads;
  const auto dh = static_cast<Eigen::Index>(config.head_width());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix dcontext = apply_backward(layer.output, cache.context, dy, grad.output);
  Matrix dq(cache.query.rows(), cache.query.cols());
  Matrix dk(dq.rows(), dq.cols());
  Matrix dv(dq.rows(), dq.cols());
  const auto m = dq.rows();
  for (std::size_t h = 0; h < heads; ++h) {
    const auto c0 = static_cast<Eigen::Index>(h) * dh;
    const Matrix& p = cache.probs[h];
    const auto dctx = dcontext.middleCols(c0, dh);
    const Matrix dp = dctx * cache.value.middleCols(c0, dh).transpose();
    dv.middleCols(c0, dh) = p.transpose() * dctx;
    Matrix ds = p.cwiseProduct(dp);
    const Vector row_sums = ds.rowwise().sum();
    ds -= p.cwiseProduct(row_sums.replicate(1, m));
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const int b = buckets(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        if (!encoding::is_masked_bucket(config.encoding, b)) {
          grad.bias_table(static_cast<Eigen::Index>(h), b) += ds(i, j);
        }
      }
    }
    dq.middleCols(c0, dh) = ds * cache.key.middleCols(c0, dh) * scale;
    dk.middleCols(c0, dh) = ds.transpose() * cache.query.middleCols(c0, dh) * scale;
  }
  Matrix dx = apply_backward(layer.query, cache.input, dq, grad.query);
  dx += apply_backward(layer.key, cache.input, dk, grad.key);
  dx += apply_backward(layer.value, cache.input, dv, grad.value);
  return dx;
}

struct LayerCache {
  AttentionCache attention;
  Matrix attention_mask;
  NormCache attention_norm;
  MlpCache ffn;
  Matrix ffn_mask;
  NormCache ffn_norm;
};

Matrix layer_forward(const Matrix& x, const IntMatrix& buckets, const EncoderLayer& layer,
                     const EncoderConfig& config, LayerCache& cache, std::mt19937_64* rng) {
  const Matrix attended = attention_forward(x, buckets, layer, config, cache.attention);
  cache.attention_mask = dropout_mask(x.rows(), x.cols(), config.dropout, rng);
  const Matrix h1 = norm_forward(layer.attention_norm, x + masked(attended, cache.attention_mask),
                                 cache.attention_norm);
  const Matrix ffn = mlp_forward(layer.ffn_in, layer.ffn_out, h1, cache.ffn);
  cache.ffn_mask = dropout_mask(x.rows(), x.cols(), config.dropout, rng);
  return norm_forward(layer.ffn_norm, h1 + masked(ffn, cache.ffn_mask), cache.ffn_norm);
}

Matrix layer_backward(const EncoderLayer& layer, const IntMatrix& buckets,
                      const EncoderConfig& config, const LayerCache& cache, const Matrix& dy,
                      EncoderLayer& grad) {
  const Matrix dr2 = norm_backward(layer.ffn_norm, cache.ffn_norm, dy, grad.ffn_norm);
  Matrix dh1 = dr2 + mlp_backward(layer.ffn_in, layer.ffn_out, cache.ffn,
                                  masked(dr2, cache.ffn_mask), grad.ffn_in, grad.ffn_out);
  const Matrix dr1 = norm_backward(layer.attention_norm, cache.attention_norm, dh1,
                                   grad.attention_norm);
  return dr1 + attention_backward(layer, buckets, config, cache.attention,
                                  masked(dr1, cache.attention_mask), grad);
}

bool is_kge_backed(const encoding::AugNode& node) {
  return node.kind == AugNodeKind::kAnchorEntity || node.kind == AugNodeKind::kRelationNode;
}

// One forward pass with everything the backward pass needs.
struct ForwardPass {
  std::vector<Eigen::Index> kge_rows;  // sequence positions backed by KGE tables
  MlpCache proj;
  Matrix projected;  // proj output before the negation transform
  std::vector<LayerCache> layers;
  std::vector<Matrix> layer_inputs;
  Matrix output;
  MlpCache rev;
  Matrix reversed;  // 2 x d0: MLP_rev(g_h), MLP_rev(g_r)
  Vector composed;  // scorer query vector

  void run(const SequenceInput& seq, const kge::KgeModel& kge, const EncoderParams& params,
           const EncoderConfig& config, std::mt19937_64* rng) {
    const auto m = static_cast<Eigen::Index>(seq.length());
    const auto d1 = static_cast<Eigen::Index>(config.width);
    const auto d0 = static_cast<Eigen::Index>(kge.width());
    if (params.proj.first.weight.rows() != d0) {
      throw Error(ErrorKind::kShape,
                  fmt::format("encoder expects KGE width {}, model has {}",
                              params.proj.first.weight.rows(), d0));
    }

    Matrix s0(0, d0);
    kge_rows.clear();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (is_kge_backed(seq.sequence[static_cast<std::size_t>(i)])) kge_rows.push_back(i);
    }
    s0.resize(static_cast<Eigen::Index>(kge_rows.size()), d0);
    for (std::size_t k = 0; k < kge_rows.size(); ++k) {
      const auto& node = seq.sequence[static_cast<std::size_t>(kge_rows[k])];
      const auto& table = node.kind == AugNodeKind::kAnchorEntity ? kge.entities : kge.relations;
      if (node.id >= table.rows()) {
        throw Error(ErrorKind::kRange, fmt::format("sequence id {} outside KGE table of {} rows",
                                                   node.id, table.rows()));
      }
      s0.row(static_cast<Eigen::Index>(k)) = table.row(node.id);
    }
    projected = kge_rows.empty() ? Matrix(0, d1)
                                 : mlp_forward(params.proj.first, params.proj.second, s0, proj);

    Matrix h(m, d1);
    for (Eigen::Index i = 0; i < m; ++i) {
      switch (seq.sequence[static_cast<std::size_t>(i)].kind) {
        case AugNodeKind::kGraphHead: h.row(i) = params.head_token.transpose(); break;
        case AugNodeKind::kGraphRelation: h.row(i) = params.relation_token.transpose(); break;
        case AugNodeKind::kVarNode:
        case AugNodeKind::kFreeVarNode: h.row(i) = params.var_token.transpose(); break;
        default: break;
      }
    }
    for (std::size_t k = 0; k < kge_rows.size(); ++k) {
      const auto& node = seq.sequence[static_cast<std::size_t>(kge_rows[k])];
      const auto row = projected.row(static_cast<Eigen::Index>(k));
      if (node.negated) {
        h.row(kge_rows[k]) = row * params.negation.transpose();
      } else {
        h.row(kge_rows[k]) = row;
      }
    }

    layers.resize(params.layers.size());
    layer_inputs.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      layer_inputs[l] = h;
      h = layer_forward(h, seq.buckets, params.layers[l], config, layers[l], rng);
    }
    output = std::move(h);
  }

  void score_vector(const kge::KgeModel& kge, const EncoderParams& params) {
    reversed = mlp_forward(params.rev.first, params.rev.second, output.topRows(2), rev);
    const auto& fn = kge::scoring_function(kge.scorer);
    composed = fn.compose(reversed.row(0).transpose(), reversed.row(1).transpose());
  }

  // dL/d(composed) -> parameter gradients.
  void backward(const SequenceInput& seq, const kge::KgeModel& kge, const EncoderParams& params,
                const EncoderConfig& config, const Vector& dcomposed, EncoderParams& grad,
                kge::KgeGradient* kge_grad) const {
    const auto& fn = kge::scoring_function(kge.scorer);
    Matrix dreversed = Matrix::Zero(2, reversed.cols());
    Vector dhead = Vector::Zero(reversed.cols());
    Vector drel = Vector::Zero(reversed.cols());
    fn.compose_backward(reversed.row(0).transpose(), reversed.row(1).transpose(), dcomposed, dhead,
                        drel);
    dreversed.row(0) = dhead.transpose();
    dreversed.row(1) = drel.transpose();

    Matrix dh = Matrix::Zero(output.rows(), output.cols());
    dh.topRows(2) = mlp_backward(params.rev.first, params.rev.second, rev, dreversed,
                                 grad.rev.first, grad.rev.second);
    for (std::size_t l = params.layers.size(); l-- > 0;) {
      dh = layer_backward(params.layers[l], seq.buckets, config, layers[l], dh, grad.layers[l]);
    }

    Matrix dprojected(static_cast<Eigen::Index>(kge_rows.size()), dh.cols());
    for (Eigen::Index i = 0; i < dh.rows(); ++i) {
      switch (seq.sequence[static_cast<std::size_t>(i)].kind) {
        case AugNodeKind::kGraphHead: grad.head_token += dh.row(i).transpose(); break;
        case AugNodeKind::kGraphRelation: grad.relation_token += dh.row(i).transpose(); break;
        case AugNodeKind::kVarNode:
        case AugNodeKind::kFreeVarNode: grad.var_token += dh.row(i).transpose(); break;
        default: break;
      }
    }
    for (std::size_t k = 0; k < kge_rows.size(); ++k) {
      const auto& node = seq.sequence[static_cast<std::size_t>(kge_rows[k])];
      const auto kk = static_cast<Eigen::Index>(k);
      if (node.negated) {
        // row_out = row_in * A^T
        grad.negation.noalias() += dh.row(kge_rows[k]).transpose() * projected.row(kk);
        dprojected.row(kk) = dh.row(kge_rows[k]) * params.negation;
      } else {
        dprojected.row(kk) = dh.row(kge_rows[k]);
      }
    }
    if (kge_rows.empty()) return;
    const Matrix ds0 = mlp_backward(params.proj.first, params.proj.second, proj, dprojected,
                                    grad.proj.first, grad.proj.second);
    if (kge_grad == nullptr) return;
    for (std::size_t k = 0; k < kge_rows.size(); ++k) {
      const auto& node = seq.sequence[static_cast<std::size_t>(kge_rows[k])];
      auto& table = node.kind == AugNodeKind::kAnchorEntity ? kge_grad->entities : kge_grad->relations;
      table.row(node.id) += ds0.row(static_cast<Eigen::Index>(k));
    }
  }
};

void zero_fill(TensorRef& t) { std::fill(t.data, t.data + t.size, 0.0); }

}  // namespace

void EncoderConfig::check() const {
  if (num_layers == 0) throw Error(ErrorKind::kConfig, "encoder needs at least one layer");
  if (width == 0 || num_heads == 0 || width % num_heads != 0) {
    throw Error(ErrorKind::kConfig,
                fmt::format("num_heads ({}) must divide the model width ({})", num_heads, width));
  }
  if (ffn_width == 0) throw Error(ErrorKind::kConfig, "ffn_width must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw Error(ErrorKind::kConfig, "dropout must be in [0, 1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw Error(ErrorKind::kConfig,
                fmt::format("label smoothing {} outside [0, 1)", label_smoothing));
  }
  if (negative_samples == 0) throw Error(ErrorKind::kConfig, "negative_samples must be positive");
  encoding::bucket_count(encoding);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

EncoderParams init_params(const EncoderConfig& config, std::size_t kge_width) {
  config.check();
  std::mt19937_64 rng(config.seed);
  const auto d1 = config.width;
  EncoderParams p;
  p.proj = {make_linear(kge_width, d1, rng), make_linear(d1, d1, rng)};
  p.negation = Matrix::Identity(static_cast<Eigen::Index>(d1), static_cast<Eigen::Index>(d1));
  Matrix noise(static_cast<Eigen::Index>(d1), static_cast<Eigen::Index>(d1));
  normal_fill(noise, config.init_noise, rng);
  p.negation += noise;
  p.head_token = make_token(d1, rng);
  p.relation_token = make_token(d1, rng);
  p.var_token = make_token(d1, rng);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    EncoderLayer layer;
    layer.query = make_linear(d1, d1, rng);
    layer.key = make_linear(d1, d1, rng);
    layer.value = make_linear(d1, d1, rng);
    layer.output = make_linear(d1, d1, rng);
    layer.attention_norm = make_norm(d1);
    layer.ffn_in = make_linear(d1, config.ffn_width, rng);
    layer.ffn_out = make_linear(config.ffn_width, d1, rng);
    layer.ffn_norm = make_norm(d1);
    layer.bias_table = Matrix::Zero(static_cast<Eigen::Index>(config.num_heads),
                                    static_cast<Eigen::Index>(config.num_buckets()));
    p.layers.push_back(std::move(layer));
  }
  p.rev = {make_linear(d1, d1, rng), make_linear(d1, kge_width, rng)};
  return p;
}

EncoderParams zeros_like(const EncoderParams& params) {
  EncoderParams out = params;
  for (auto& t : tensors(out)) zero_fill(t);
  return out;
}

std::vector<TensorRef> tensors(EncoderParams& params) {
  std::vector<TensorRef> out;
  const auto add = [&](std::string name, auto& tensor) {
    out.push_back({std::move(name), tensor.data(), static_cast<std::size_t>(tensor.size()),
                   tensor.rows(), tensor.cols()});
  };
  const auto add_linear = [&](const std::string& name, Linear& l) {
    add(name + ".weight", l.weight);
    add(name + ".bias", l.bias);
  };
  add_linear("proj.first", params.proj.first);
  add_linear("proj.second", params.proj.second);
  add("negation", params.negation);
  add("tokens.head", params.head_token);
  add("tokens.relation", params.relation_token);
  add("tokens.var", params.var_token);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const auto prefix = fmt::format("layer{}.", l);
    add_linear(prefix + "query", layer.query);
    add_linear(prefix + "key", layer.key);
    add_linear(prefix + "value", layer.value);
    add_linear(prefix + "output", layer.output);
    add(prefix + "attention_norm.gamma", layer.attention_norm.gamma);
    add(prefix + "attention_norm.beta", layer.attention_norm.beta);
    add_linear(prefix + "ffn_in", layer.ffn_in);
    add_linear(prefix + "ffn_out", layer.ffn_out);
    add(prefix + "ffn_norm.gamma", layer.ffn_norm.gamma);
    add(prefix + "ffn_norm.beta", layer.ffn_norm.beta);
    add(prefix + "bias_table", layer.bias_table);
  }
  add_linear("rev.first", params.rev.first);
  add_linear("rev.second", params.rev.second);
  return out;
}

std::size_t parameter_count(const EncoderParams& params) {
  auto copy = params;
  std::size_t total = 0;
  for (const auto& t : tensors(copy)) total += t.size;
  return total;
}

Matrix embed_sequence(const SequenceInput& seq, const kge::KgeModel& kge,
                      const EncoderParams& params) {
  ForwardPass pass;
  EncoderConfig no_layers;
  EncoderParams embed_only = params;
  embed_only.layers.clear();
  no_layers.width = static_cast<std::size_t>(params.head_token.size());
  no_layers.num_heads = 1;
  pass.run(seq, kge, embed_only, no_layers, nullptr);
  return pass.output;
}

Matrix multi_head_attention(const Matrix& input, const IntMatrix& buckets,
                            const EncoderLayer& layer, const EncoderConfig& config) {
  AttentionCache cache;
  return attention_forward(input, buckets, layer, config, cache);
}

Matrix feed_forward(const Matrix& input, const EncoderLayer& layer) {
  MlpCache cache;
  return mlp_forward(layer.ffn_in, layer.ffn_out, input, cache);
}

Matrix attention_layer(const Matrix& input, const IntMatrix& buckets, const EncoderLayer& layer,
                       const EncoderConfig& config) {
  LayerCache cache;
  return layer_forward(input, buckets, layer, config, cache, nullptr);
}

Matrix attention_weights(const Matrix& input, const IntMatrix& buckets, const EncoderLayer& layer,
                         const EncoderConfig& config, std::size_t head) {
  AttentionCache cache;
  attention_forward(input, buckets, layer, config, cache);
  return cache.probs.at(head);
}

EncodedQuery encode(const SequenceInput& seq, const kge::KgeModel& kge,
                    const EncoderParams& params, const EncoderConfig& config) {
  ForwardPass pass;
  pass.run(seq, kge, params, config, nullptr);
  return {pass.output.row(0).transpose(), pass.output.row(1).transpose()};
}

Vector score_sequence(const SequenceInput& seq, const kge::KgeModel& kge,
                      const EncoderParams& params, const EncoderConfig& config) {
  ForwardPass pass;
  pass.run(seq, kge, params, config, nullptr);
  pass.score_vector(kge, params);
  return kge.entities * pass.composed;
}

ScoredQuery score_query(const query::DNFQuery& query, const kge::KgeModel& kge,
                        const EncoderParams& params, const EncoderConfig& config) {
  if (query.conjuncts.empty()) throw Error(ErrorKind::kInvalidGraph, "query has no conjuncts");
  ScoredQuery result;
  for (const auto& conjunct : query.conjuncts) {
    const auto seq = encoding::encode_graph(conjunct, config.encoding);
    Vector scores = score_sequence(seq, kge, params, config);
    if (result.scores.size() == 0) {
      result.scores = scores;
    } else {
      result.scores = result.scores.cwiseMax(scores);
    }
    if (query.conjuncts.size() > 1) result.conjunct_scores.push_back(std::move(scores));
  }
  return result;
}

std::vector<double> smoothed_labels(double alpha, std::size_t classes) {
  if (alpha < 0.0 || alpha >= 1.0) {
    throw Error(ErrorKind::kConfig, fmt::format("label smoothing {} outside [0, 1)", alpha));
  }
  if (classes == 0) throw Error(ErrorKind::kConfig, "label smoothing needs at least one class");
  const double uniform = alpha / static_cast<double>(classes);
  std::vector<double> labels(classes, uniform);
  labels[0] = (1.0 - alpha) + uniform;
  return labels;
}

double smoothed_cross_entropy(std::span<const double> logits, double alpha,
                              std::span<double> grad) {
  const auto labels = smoothed_labels(alpha, logits.size());
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  const double lse = max + std::log(sum);
  double loss = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) loss -= labels[k] * (logits[k] - lse);
  if (!grad.empty()) {
    for (std::size_t k = 0; k < logits.size(); ++k) {
      grad[k] = std::exp(logits[k] - lse) - labels[k];
    }
  }
  return loss;
}

std::vector<kg::EntityId> sample_negatives(std::size_t num_entities,
                                           std::span<const kg::EntityId> answers,
                                           std::size_t count, std::mt19937_64& rng) {
  std::vector<kg::EntityId> out;
  const auto is_answer = [&](kg::EntityId e) {
    return std::binary_search(answers.begin(), answers.end(), e);
  };
  if (num_entities <= answers.size() + count) {
    for (std::size_t e = 0; e < num_entities; ++e) {
      if (!is_answer(static_cast<kg::EntityId>(e))) out.push_back(static_cast<kg::EntityId>(e));
    }
    return out;
  }
  std::uniform_int_distribution<std::size_t> pick(0, num_entities - 1);
  while (out.size() < count) {
    const auto e = static_cast<kg::EntityId>(pick(rng));
    if (!is_answer(e)) out.push_back(e);
  }
  return out;
}

double example_loss(const SequenceInput& seq, const TrainingExample& example,
                    const kge::KgeModel& kge, const EncoderParams& params,
                    const EncoderConfig& config, EncoderParams* grad, kge::KgeGradient* kge_grad,
                    std::mt19937_64* dropout_rng) {
  ForwardPass pass;
  pass.run(seq, kge, params, config, dropout_rng);
  pass.score_vector(kge, params);

  std::vector<kg::EntityId> classes;
  classes.reserve(example.negatives.size() + 1);
  classes.push_back(example.positive);
  classes.insert(classes.end(), example.negatives.begin(), example.negatives.end());
  std::vector<double> logits(classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    logits[k] = kge.entities.row(classes[k]).dot(pass.composed);
  }
  std::vector<double> dlogits(classes.size());
  const double loss = smoothed_cross_entropy(logits, config.label_smoothing, dlogits);
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::kNumeric, fmt::format("non-finite encoder loss ({})", loss));
  }
  if (grad == nullptr) return loss;

  Vector dcomposed = Vector::Zero(pass.composed.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    dcomposed += dlogits[k] * kge.entities.row(classes[k]).transpose();
    if (kge_grad != nullptr) {
      kge_grad->entities.row(classes[k]) += dlogits[k] * pass.composed.transpose();
    }
  }
  pass.backward(seq, kge, params, config, dcomposed, *grad, kge_grad);
  return loss;
}

void Adam::step(std::span<const TensorRef> params, std::span<const TensorRef> grads) {
  if (params.size() != grads.size()) throw Error(ErrorKind::kShape, "adam: tensor list mismatch");
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size)));
      second_.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size)));
    }
  }
  ++step_;
  const double correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size != grads[t].size) throw Error(ErrorKind::kShape, "adam: tensor size mismatch");
    Eigen::Map<Vector> value(params[t].data, static_cast<Eigen::Index>(params[t].size));
    Eigen::Map<const Vector> g(grads[t].data, static_cast<Eigen::Index>(grads[t].size));
    first_[t] = config_.beta1 * first_[t] + (1.0 - config_.beta1) * g;
    second_[t] = config_.beta2 * second_[t] + (1.0 - config_.beta2) * g.cwiseAbs2();
    value.array() -= config_.learning_rate * (first_[t].array() / correction1) /
                     ((second_[t].array() / correction2).sqrt() + config_.epsilon);
  }
}

}  // namespace q2t::graphormer
