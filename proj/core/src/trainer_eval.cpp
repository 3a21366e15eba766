#include "q2t/trainer_eval.hpp"

#include <algorithm>
#include <array>
#include <iterator>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "q2t/error.hpp"
#include "q2t/key_value.hpp"
#include "q2t/metrics.hpp"

namespace q2t::trainer {

namespace gr = graphormer;
using symbolic::AnswerSet;
using symbolic::SampledDataset;

namespace {

struct TrainItem {
  encoding::SequenceInput sequence;
  const AnswerSet* answers = nullptr;
};

std::map<QueryType, std::vector<TrainItem>> prepare_items(const SampledDataset& train,
                                                          const gr::EncoderConfig& enc,
                                                          const std::map<QueryType, double>& mix) {
  std::map<QueryType, std::vector<TrainItem>> items;
  for (const auto& record : train.records) {
    const auto type = record.query.type;
    const auto weight = mix.find(type);
    if (weight == mix.end() || weight->second <= 0.0) continue;
    if (record.query.conjuncts.size() != 1) {
      throw Error(ErrorKind::kUnsupportedQuery,
                  fmt::format("type {} has {} conjuncts; only single-conjunct types can be trained",
                              query::query_type_name(type), record.query.conjuncts.size()));
    }
    if (record.easy_answers.empty()) continue;
    items[type].push_back({encoding::encode_graph(record.query.conjuncts[0], enc.encoding),
                           &record.easy_answers});
  }
  return items;
}

void zero(std::vector<gr::TensorRef>& list) {
  for (auto& t : list) std::fill(t.data, t.data + t.size, 0.0);
}

std::vector<gr::TensorRef> kge_tensors(kge::KgeModel& model) {
  return {{"entities", model.entities.data(), static_cast<std::size_t>(model.entities.size()),
           model.entities.rows(), model.entities.cols()},
          {"relations", model.relations.data(), static_cast<std::size_t>(model.relations.size()),
           model.relations.rows(), model.relations.cols()}};
}

std::vector<gr::TensorRef> kge_tensors(kge::KgeGradient& grad) {
  return {{"entities", grad.entities.data(), static_cast<std::size_t>(grad.entities.size()),
           grad.entities.rows(), grad.entities.cols()},
          {"relations", grad.relations.data(), static_cast<std::size_t>(grad.relations.size()),
           grad.relations.rows(), grad.relations.cols()}};
}

double selection_score(const EvalReport& report) {
  if (report.a_p) return *report.a_p;
  if (report.a_n) return *report.a_n;
  return -std::numeric_limits<double>::infinity();
}

std::string optional_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

std::map<QueryType, double> default_type_mix() {
  std::map<QueryType, double> mix;
  for (auto type : {QueryType::k1p, QueryType::k2p, QueryType::k3p, QueryType::k2i,
                    QueryType::k3i}) {
    mix[type] = 1.0;
  }
  for (auto type : query::kNegationTemplates) mix[type] = 1.0;
  return mix;
}

void TrainRunConfig::check() const {
  if (batch_size == 0) throw Error(ErrorKind::kConfig, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kConfig, "learning_rate must be positive");
  for (const auto& [type, weight] : type_mix) {
    if (weight < 0.0 || !std::isfinite(weight)) {
      throw Error(ErrorKind::kConfig, fmt::format("type_mix weight for {} must be finite and >= 0",
                                                  query::query_type_name(type)));
    }
  }
}

TrainResult train_encoder(const SampledDataset& train, const SampledDataset& valid,
                          const kge::KgeModel& kge, const gr::EncoderConfig& encoder_config,
                          const TrainRunConfig& config, const StepCallback& on_step) {
  encoder_config.check();
  return train_encoder(train, valid, kge, encoder_config, config,
                       gr::init_params(encoder_config, kge.width()), on_step);
}

TrainResult train_encoder(const SampledDataset& train, const SampledDataset& valid,
                          const kge::KgeModel& kge, const gr::EncoderConfig& encoder_config,
                          const TrainRunConfig& config, gr::EncoderParams initial,
                          const StepCallback& on_step) {
  config.check();
  encoder_config.check();
  if (static_cast<std::size_t>(initial.proj.first.weight.rows()) != kge.width()) {
    throw Error(ErrorKind::kShape,
                fmt::format("encoder expects KGE width {}, model has {}",
                            initial.proj.first.weight.rows(), kge.width()));
  }
  TrainResult result;
  if (config.max_steps == 0) {
    result.params = std::move(initial);
    return result;
  }

  const auto items = prepare_items(train, encoder_config, config.type_mix);
  std::vector<QueryType> types;
  std::vector<double> weights;
  for (const auto& [type, list] : items) {
    types.push_back(type);
    weights.push_back(config.type_mix.at(type));
  }
  if (types.empty()) {
    throw Error(ErrorKind::kConfig, "no training records match the configured type mix");
  }

  std::optional<kge::KgeModel> working;
  if (!config.freeze_kge) working = kge;
  const kge::KgeModel& active = working ? *working : kge;

  gr::EncoderParams params = std::move(initial);
  std::optional<gr::EncoderParams> best_params;
  auto param_list = gr::tensors(params);
  auto grad = gr::zeros_like(params);
  auto grad_list = gr::tensors(grad);
  gr::Adam adam({.learning_rate = config.learning_rate});

  std::optional<kge::KgeGradient> kge_grad;
  std::optional<gr::Adam> kge_adam;
  std::vector<gr::TensorRef> kge_param_list;
  std::vector<gr::TensorRef> kge_grad_list;
  if (working) {
    kge_grad = kge::KgeGradient{kge::Matrix::Zero(active.entities.rows(), active.entities.cols()),
                                kge::Matrix::Zero(active.relations.rows(), active.relations.cols())};
    kge_adam.emplace(gr::AdamConfig{.learning_rate = config.learning_rate});
    kge_param_list = kge_tensors(*working);
    kge_grad_list = kge_tensors(*kge_grad);
  }

  std::mt19937_64 rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::discrete_distribution<std::size_t> pick_type(weights.begin(), weights.end());
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
  double best = -std::numeric_limits<double>::infinity();
  const bool validate = !valid.records.empty();

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    zero(grad_list);
    if (kge_grad) zero(kge_grad_list);
    double loss = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto& list = items.at(types[pick_type(rng)]);
      const auto& item = list[std::uniform_int_distribution<std::size_t>(0, list.size() - 1)(rng)];
      const auto& answers = *item.answers;
      gr::TrainingExample example;
      example.positive = answers[std::uniform_int_distribution<std::size_t>(0, answers.size() - 1)(rng)];
      example.negatives = gr::sample_negatives(active.num_entities(), answers,
                                               encoder_config.negative_samples, rng);
      loss += gr::example_loss(item.sequence, example, active, params, encoder_config, &grad,
                               kge_grad ? &*kge_grad : nullptr, &dropout_rng);
    }
    for (auto& t : grad_list) {
      for (std::size_t i = 0; i < t.size; ++i) t.data[i] *= inv_batch;
    }
    adam.step(param_list, grad_list);
    if (kge_adam) {
      kge_grad->entities *= inv_batch;
      kge_grad->relations *= inv_batch;
      kge_adam->step(kge_param_list, kge_grad_list);
    }

    TrainLogEntry entry{step, loss * inv_batch, std::nullopt};
    const bool due = step == config.max_steps || (config.eval_every > 0 && step % config.eval_every == 0);
    if (validate && due) {
      const auto report = evaluate(valid, active, params, encoder_config);
      entry.valid_ap = report.a_p;
      const double score = selection_score(report);
      if (!best_params || score > best) {
        best = score;
        result.best_valid_ap = report.a_p;
        result.best_step = step;
        best_params = params;
        if (working) result.tuned_kge = *working;
      }
    }
    result.log.push_back(entry);
    if (on_step) on_step(entry);
  }
  if (best_params) {
    result.params = std::move(*best_params);
  } else {
    result.params = std::move(params);
    result.best_step = config.max_steps;
    if (working) result.tuned_kge = std::move(*working);
  }
  return result;
}

std::size_t rank_hard_answer(std::span<const double> scores, kg::EntityId answer,
                             std::span<const kg::EntityId> all_answers) {
  return filtered_rank(scores, answer, all_answers);
}

std::optional<double> EvalReport::mean_mrr(std::span<const QueryType> types) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (auto type : types) {
    auto it = per_type.find(type);
    if (it == per_type.end() || it->second.queries == 0) continue;
    sum += it->second.mrr;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

namespace {

void finish_report(EvalReport& report) {
  report.a_p = report.mean_mrr(query::kEpfoTemplates);
  report.a_n = report.mean_mrr(query::kNegationTemplates);
}

}  // namespace

EvalReport evaluate_scorer(const SampledDataset& dataset, const Scorer& scorer,
                           AnswerTarget target) {
  const auto start = std::chrono::steady_clock::now();
  EvalReport report;
  std::map<QueryType, RankAccumulator> acc;
  std::map<QueryType, std::size_t> queries;
  for (const auto& record : dataset.records) {
    const auto& targets = target == AnswerTarget::kHard ? record.hard_answers : record.easy_answers;
    if (targets.empty()) {
      ++report.skipped;
      continue;
    }
    AnswerSet filter;
    std::set_union(record.easy_answers.begin(), record.easy_answers.end(),
                   record.hard_answers.begin(), record.hard_answers.end(),
                   std::back_inserter(filter));
    const kge::Vector scores = scorer(record.query);
    const std::span<const double> view(scores.data(), static_cast<std::size_t>(scores.size()));
    auto& a = acc[record.query.type];
    for (auto answer : targets) a.add(rank_hard_answer(view, answer, filter));
    ++queries[record.query.type];
  }
  for (const auto& [type, a] : acc) {
    report.per_type[type] = {a.mrr(), a.hit_rate(a.hits1), a.hit_rate(a.hits3),
                             a.hit_rate(a.hits10), queries[type], a.count};
  }
  finish_report(report);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

EvalReport evaluate(const SampledDataset& dataset, const kge::KgeModel& kge,
                    const gr::EncoderParams& params, const gr::EncoderConfig& encoder_config,
                    AnswerTarget target) {
  return evaluate_scorer(
      dataset,
      [&](const query::DNFQuery& q) {
        return gr::score_query(q, kge, params, encoder_config).scores;
      },
      target);
}

namespace {

constexpr std::string_view kReportHeader = "type,queries,answers,mrr,hits1,hits3,hits10";

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::string out = std::string(kReportHeader) + "\n";
  for (auto type : query::kAllTemplates) {
    auto it = report.per_type.find(type);
    if (it == report.per_type.end()) {
      out += fmt::format("{},0,0,,,,\n", query::query_type_name(type));
      continue;
    }
    const auto& m = it->second;
    out += fmt::format("{},{},{},{},{},{},{}\n", query::query_type_name(type), m.queries, m.answers,
                       format_double(m.mrr), format_double(m.hits1), format_double(m.hits3),
                       format_double(m.hits10));
  }
  return out;
}

EvalReport parse_report_csv(std::string_view text) {
  EvalReport report;
  std::size_t rows = 0;
  bool header = true;
  for (const auto& raw : split(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (header) {
      if (line != kReportHeader) {
        throw Error(ErrorKind::kParse, fmt::format("unexpected report header '{}'", line));
      }
      header = false;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 7) {
      throw Error(ErrorKind::kParse, fmt::format("report row '{}' has {} fields", line, fields.size()));
    }
    ++rows;
    const auto type = query::parse_query_type(fields[0]);
    if (fields[3].empty()) continue;
    TypeMetrics m;
    m.queries = static_cast<std::size_t>(parse_int(fields[1], "queries"));
    m.answers = static_cast<std::size_t>(parse_int(fields[2], "answers"));
    m.mrr = parse_double(fields[3], "mrr");
    m.hits1 = parse_double(fields[4], "hits1");
    m.hits3 = parse_double(fields[5], "hits3");
    m.hits10 = parse_double(fields[6], "hits10");
    report.per_type[type] = m;
  }
  if (rows == 0) throw Error(ErrorKind::kNoRows, "report has no rows");
  finish_report(report);
  return report;
}

std::string format_report_table(std::span<const std::pair<std::string, EvalReport>> rows) {
  std::size_t name_width = 8;
  for (const auto& [name, report] : rows) name_width = std::max(name_width, name.size() + 2);
  const auto cell = [](const std::optional<double>& v) {
    return v ? fmt::format("{:>7.1f}", *v * 100.0) : fmt::format("{:>7}", "-");
  };
  std::string out = fmt::format("{:<{}}", "Model", name_width);
  for (auto type : query::kAllTemplates) out += fmt::format("{:>7}", query::query_type_name(type));
  out += fmt::format("{:>7}{:>7}\n", "A_p", "A_n");
  for (const auto& [name, report] : rows) {
    out += fmt::format("{:<{}}", name, name_width);
    for (auto type : query::kAllTemplates) {
      auto it = report.per_type.find(type);
      out += cell(it == report.per_type.end() || it->second.queries == 0
                      ? std::nullopt
                      : std::optional<double>(it->second.mrr));
    }
    out += cell(report.a_p) + cell(report.a_n) + "\n";
  }
  return out;
}

std::string_view sweep_axis_name(SweepAxis axis) {
  return axis == SweepAxis::kLabelSmoothing ? "label_smoothing" : "num_layers";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "label_smoothing") return SweepAxis::kLabelSmoothing;
  if (name == "num_layers") return SweepAxis::kNumLayers;
  throw Error(ErrorKind::kConfig, fmt::format("unknown sweep axis '{}'", name));
}

std::vector<SweepRow> sweep(SweepAxis axis, std::span<const double> values, const SweepData& data,
                            const gr::EncoderConfig& encoder_config, const TrainRunConfig& config) {
  if (values.empty()) throw Error(ErrorKind::kConfig, "sweep needs at least one value");
  if (!data.train || !data.kge) throw Error(ErrorKind::kConfig, "sweep needs training data and a KGE");
  static const SampledDataset kEmpty;
  const auto& valid = data.valid ? *data.valid : kEmpty;
  const auto& test = data.test && !data.test->records.empty() ? *data.test : valid;
  std::vector<SweepRow> rows;
  for (double value : values) {
    SweepRow row;
    row.value = value;
    try {
      auto cfg = encoder_config;
      if (axis == SweepAxis::kLabelSmoothing) {
        cfg.label_smoothing = value;
      } else {
        if (value < 1.0 || value != std::floor(value)) {
          throw Error(ErrorKind::kConfig, fmt::format("num_layers must be a positive integer, got {}", value));
        }
        cfg.num_layers = static_cast<std::size_t>(value);
      }
      const auto trained = train_encoder(*data.train, valid, *data.kge, cfg, config);
      const auto& model = trained.tuned_kge ? *trained.tuned_kge : *data.kge;
      const auto report = evaluate(test, model, trained.params, cfg);
      constexpr std::array multi{QueryType::k2p, QueryType::k3p};
      constexpr std::array inter{QueryType::k2i, QueryType::k3i};
      row.a_m = report.mean_mrr(multi);
      row.a_i = report.mean_mrr(inter);
      row.a_n = report.a_n;
      row.a_p = report.a_p;
    } catch (const Error& e) {
      row.error = fmt::format("{}: {}", error_kind_name(e.kind()), e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows) {
  std::string out = fmt::format("{},A_m,A_i,A_n,A_p,error\n", sweep_axis_name(axis));
  for (const auto& row : rows) {
    std::string error = row.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out += fmt::format("{},{},{},{},{},{}\n", format_double(row.value), optional_field(row.a_m),
                       optional_field(row.a_i), optional_field(row.a_n), optional_field(row.a_p),
                       error);
  }
  return out;
}

}  // namespace q2t::trainer
