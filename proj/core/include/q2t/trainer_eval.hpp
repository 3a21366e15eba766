#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "q2t/link_predictor.hpp"
#include "q2t/query_graphormer.hpp"
#include "q2t/symbolic_engine.hpp"

namespace q2t::trainer {

using query::QueryType;

// Types trained on by default: 1p/2p/3p/2i/3i and the five negation types.
// pi/ip/2u/up are evaluation-only.
std::map<QueryType, double> default_type_mix();

struct TrainRunConfig {
  std::size_t batch_size = 1024;
  double learning_rate = 4e-4;
  std::size_t max_steps = 10000;
  bool freeze_kge = true;
  // Validation every this many steps (0: only after the last step).
  std::size_t eval_every = 0;
  std::uint64_t seed = 0;
  // Sampling weight per template; types absent from the training set are skipped.
  std::map<QueryType, double> type_mix = default_type_mix();

  void check() const;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double loss = 0.0;  // mean over the step's batch
  std::optional<double> valid_ap;
};

struct TrainResult {
  graphormer::EncoderParams params;
  // Tuned tables when freeze_kge is false.
  std::optional<kge::KgeModel> tuned_kge;
  std::vector<TrainLogEntry> log;
  std::optional<double> best_valid_ap;
  std::size_t best_step = 0;
};

using StepCallback = std::function<void(const TrainLogEntry&)>;

// Supervision comes from each training record's easy answers. When `valid`
// has records, the parameters with the best validation A_p are returned.
// With zero steps the initial parameters come back unchanged.
TrainResult train_encoder(const symbolic::SampledDataset& train,
                          const symbolic::SampledDataset& valid, const kge::KgeModel& kge,
                          const graphormer::EncoderConfig& encoder_config,
                          const TrainRunConfig& config, const StepCallback& on_step = {});

// Same as above, starting from `initial` instead of fresh parameters.
TrainResult train_encoder(const symbolic::SampledDataset& train,
                          const symbolic::SampledDataset& valid, const kge::KgeModel& kge,
                          const graphormer::EncoderConfig& encoder_config,
                          const TrainRunConfig& config, graphormer::EncoderParams initial,
                          const StepCallback& on_step = {});

// 1 + number of entities outside `all_answers` scoring strictly higher.
std::size_t rank_hard_answer(std::span<const double> scores, kg::EntityId answer,
                             std::span<const kg::EntityId> all_answers);

struct TypeMetrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t queries = 0;
  std::size_t answers = 0;
};

struct EvalReport {
  std::map<QueryType, TypeMetrics> per_type;
  std::optional<double> a_p;  // mean MRR over EPFO types present
  std::optional<double> a_n;  // mean MRR over negation types present
  std::size_t skipped = 0;    // records without target answers
  double runtime_seconds = 0.0;

  // Unweighted mean MRR over the given types that have queries.
  std::optional<double> mean_mrr(std::span<const QueryType> types) const;
};

// kHard ranks hard answers (filtering easy + hard); kEasy ranks easy
// answers against the rest, for measuring fit on training queries.
enum class AnswerTarget { kHard, kEasy };

using Scorer = std::function<kge::Vector(const query::DNFQuery&)>;

EvalReport evaluate_scorer(const symbolic::SampledDataset& dataset, const Scorer& scorer,
                           AnswerTarget target = AnswerTarget::kHard);

EvalReport evaluate(const symbolic::SampledDataset& dataset, const kge::KgeModel& kge,
                    const graphormer::EncoderParams& params,
                    const graphormer::EncoderConfig& encoder_config,
                    AnswerTarget target = AnswerTarget::kHard);

// One row per template (empty metric fields for absent types).
std::string report_csv(const EvalReport& report);
EvalReport parse_report_csv(std::string_view text);
// Percent MRR per type plus A_p and A_n, one model per row.
std::string format_report_table(std::span<const std::pair<std::string, EvalReport>> rows);

enum class SweepAxis { kLabelSmoothing, kNumLayers };
std::string_view sweep_axis_name(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepRow {
  double value = 0.0;
  std::optional<double> a_m;  // 2p, 3p
  std::optional<double> a_i;  // 2i, 3i
  std::optional<double> a_n;
  std::optional<double> a_p;
  std::string error;  // non-empty when this point failed
};

struct SweepData {
  const symbolic::SampledDataset* train = nullptr;
  const symbolic::SampledDataset* valid = nullptr;
  const symbolic::SampledDataset* test = nullptr;
  const kge::KgeModel* kge = nullptr;
};

// Train + evaluate per value; a failing point records its error and the
// sweep continues.
std::vector<SweepRow> sweep(SweepAxis axis, std::span<const double> values, const SweepData& data,
                            const graphormer::EncoderConfig& encoder_config,
                            const TrainRunConfig& config);

std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows);

}  // namespace q2t::trainer
