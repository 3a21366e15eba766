#include "run_config.hpp"

#include <fmt/format.h>

#include "q2t/encoder_checkpoint.hpp"
#include "q2t/error.hpp"

namespace q2t::cli {

namespace {

template <typename F>
auto as_config_error(std::string_view key, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    throw Error(ErrorKind::kConfig, fmt::format("config key {}: {}", key, e.what()));
  }
}

std::string type_list(std::span<const query::QueryType> types) {
  std::string out;
  for (auto t : types) {
    if (!out.empty()) out += ',';
    out += query::query_type_name(t);
  }
  return out;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  auto& v = c.values_;
  v.set("seed", "0");
  v.set("device", "cpu");
  v.set("data.dir", "");

  const kg::SyntheticSpec syn;
  v.set("synthetic.num_entities", std::to_string(syn.num_entities));
  v.set("synthetic.num_relations", std::to_string(syn.num_relations));
  v.set("synthetic.num_triples", std::to_string(syn.num_triples));
  v.set("synthetic.valid_fraction", format_double(syn.valid_fraction));
  v.set("synthetic.test_fraction", format_double(syn.test_fraction));

  const symbolic::SamplerConfig sc;
  std::vector<query::QueryType> train_types;
  for (const auto& [t, w] : trainer::default_type_mix()) train_types.push_back(t);
  v.set("sample.train_types", type_list(train_types));
  v.set("sample.eval_types", type_list(query::kAllTemplates));
  v.set("sample.train_per_type", "1000");
  v.set("sample.valid_per_type", "100");
  v.set("sample.test_per_type", "100");
  v.set("sample.negation_attempts", std::to_string(sc.negation_attempts));
  v.set("sample.max_attempts", std::to_string(sc.max_attempts));
  v.set("sample.record_attempt_factor", std::to_string(sc.record_attempt_factor));

  const kge::PretrainConfig pc;
  v.set("pretrain.scorer", std::string(kge::scorer_name(pc.scorer)));
  v.set("pretrain.rank", std::to_string(pc.rank));
  v.set("pretrain.lambda_rel", format_double(pc.lambda_rel));
  v.set("pretrain.learning_rate", format_double(pc.learning_rate));
  v.set("pretrain.batch_size", std::to_string(pc.batch_size));
  v.set("pretrain.epochs", std::to_string(pc.epochs));
  v.set("pretrain.reg_weight", format_double(pc.reg_weight));
  v.set("pretrain.init_scale", format_double(pc.init_scale));
  v.set("pretrain.adagrad_epsilon", format_double(pc.adagrad_epsilon));
  v.set("pretrain.log_every", "10");

  KeyValueFile enc;
  graphormer::write_encoder_config(graphormer::EncoderConfig{}, enc);
  for (const auto& [key, value] : enc.entries()) {
    if (key != "encoder.seed") v.set(key, value);
  }

  const trainer::TrainRunConfig tc;
  v.set("train.batch_size", std::to_string(tc.batch_size));
  v.set("train.learning_rate", format_double(tc.learning_rate));
  v.set("train.max_steps", std::to_string(tc.max_steps));
  v.set("train.freeze_kge", tc.freeze_kge ? "true" : "false");
  v.set("train.eval_every", std::to_string(tc.eval_every));
  v.set("train.type_mix", format_type_mix(tc.type_mix));
  v.set("train.log_every", "100");

  v.set("eval.split", "test");
  v.set("eval.target", "auto");
  v.set("answer.top_k", "10");
  v.set("sweep.axis", "label_smoothing");
  v.set("sweep.values", "0,0.2,0.4,0.6,0.8");
  return c;
}

void RunConfig::merge(const KeyValueFile& file) {
  for (const auto& [key, value] : file.entries()) set(key, value);
}

void RunConfig::merge_file(const std::filesystem::path& path) { merge(KeyValueFile::read(path)); }

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorKind::kConfig,
                fmt::format("override '{}' is not of the form key=value", assignment));
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.contains(key)) throw Error(ErrorKind::kConfig, fmt::format("unknown config key '{}'", key));
  values_.set(key, value);
}

const std::string& RunConfig::get(std::string_view key) const { return values_.at(key); }

std::int64_t RunConfig::get_int(std::string_view key) const {
  return as_config_error(key, [&] { return parse_int(get(key), key); });
}

std::size_t RunConfig::get_size(std::string_view key) const {
  const auto v = get_int(key);
  if (v < 0) throw Error(ErrorKind::kConfig, fmt::format("config key {} must be non-negative", key));
  return static_cast<std::size_t>(v);
}

double RunConfig::get_double(std::string_view key) const {
  return as_config_error(key, [&] { return parse_double(get(key), key); });
}

bool RunConfig::get_bool(std::string_view key) const {
  return as_config_error(key, [&] { return parse_bool(get(key), key); });
}

std::uint64_t RunConfig::seed() const { return get_size("seed"); }

kg::SyntheticSpec RunConfig::synthetic() const {
  kg::SyntheticSpec s;
  s.num_entities = get_size("synthetic.num_entities");
  s.num_relations = get_size("synthetic.num_relations");
  s.num_triples = get_size("synthetic.num_triples");
  s.valid_fraction = get_double("synthetic.valid_fraction");
  s.test_fraction = get_double("synthetic.test_fraction");
  s.seed = seed();
  return s;
}

symbolic::SamplerConfig RunConfig::sampler() const {
  symbolic::SamplerConfig s;
  s.negation_attempts = get_size("sample.negation_attempts");
  s.max_attempts = get_size("sample.max_attempts");
  s.record_attempt_factor = get_size("sample.record_attempt_factor");
  return s;
}

symbolic::GenerationCounts RunConfig::generation_counts() const {
  symbolic::GenerationCounts g;
  const auto train_types =
      as_config_error("sample.train_types", [&] { return parse_type_list(get("sample.train_types")); });
  const auto eval_types =
      as_config_error("sample.eval_types", [&] { return parse_type_list(get("sample.eval_types")); });
  for (auto t : train_types) g.train[t] = get_size("sample.train_per_type");
  for (auto t : eval_types) {
    g.valid[t] = get_size("sample.valid_per_type");
    g.test[t] = get_size("sample.test_per_type");
  }
  return g;
}

kge::PretrainConfig RunConfig::pretrain() const {
  kge::PretrainConfig p;
  p.scorer = as_config_error("pretrain.scorer", [&] { return kge::parse_scorer(get("pretrain.scorer")); });
  p.rank = get_size("pretrain.rank");
  p.lambda_rel = get_double("pretrain.lambda_rel");
  p.learning_rate = get_double("pretrain.learning_rate");
  p.batch_size = get_size("pretrain.batch_size");
  p.epochs = get_size("pretrain.epochs");
  p.reg_weight = get_double("pretrain.reg_weight");
  p.init_scale = get_double("pretrain.init_scale");
  p.adagrad_epsilon = get_double("pretrain.adagrad_epsilon");
  p.seed = seed();
  as_config_error("pretrain", [&] { p.check(); return 0; });
  return p;
}

graphormer::EncoderConfig RunConfig::encoder() const {
  auto e = as_config_error("encoder", [&] { return graphormer::read_encoder_config(values_); });
  e.seed = seed();
  as_config_error("encoder", [&] { e.check(); return 0; });
  return e;
}

trainer::TrainRunConfig RunConfig::train() const {
  trainer::TrainRunConfig t;
  t.batch_size = get_size("train.batch_size");
  t.learning_rate = get_double("train.learning_rate");
  t.max_steps = get_size("train.max_steps");
  t.freeze_kge = get_bool("train.freeze_kge");
  t.eval_every = get_size("train.eval_every");
  t.type_mix = as_config_error("train.type_mix", [&] { return parse_type_mix(get("train.type_mix")); });
  t.seed = seed();
  as_config_error("train", [&] { t.check(); return 0; });
  return t;
}

std::string RunConfig::effective_text(std::string_view version, std::string_view command) const {
  return fmt::format("# q2t {} {}\n", version, command) + values_.to_string();
}

std::map<query::QueryType, double> parse_type_mix(std::string_view text) {
  std::map<query::QueryType, double> mix;
  for (const auto& item : split(text, ',')) {
    const auto entry = trim(item);
    if (entry.empty()) continue;
    const auto colon = entry.find(':');
    const auto type = query::parse_query_type(trim(entry.substr(0, colon)));
    const double weight =
        colon == std::string::npos ? 1.0 : parse_double(trim(entry.substr(colon + 1)), entry);
    if (!(weight >= 0.0)) throw Error(ErrorKind::kConfig, fmt::format("negative weight in '{}'", entry));
    mix[type] = weight;
  }
  if (mix.empty()) throw Error(ErrorKind::kConfig, "empty type mix");
  return mix;
}

std::string format_type_mix(const std::map<query::QueryType, double>& mix) {
  std::string out;
  for (const auto& [t, w] : mix) {
    if (!out.empty()) out += ',';
    out += fmt::format("{}:{}", query::query_type_name(t), format_double(w));
  }
  return out;
}

std::vector<query::QueryType> parse_type_list(std::string_view text) {
  std::vector<query::QueryType> out;
  for (const auto& item : split(text, ',')) {
    const auto name = trim(item);
    if (!name.empty()) out.push_back(query::parse_query_type(name));
  }
  return out;
}

std::vector<double> parse_value_list(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    const auto v = trim(item);
    if (!v.empty()) out.push_back(parse_double(v, "value list"));
  }
  if (out.empty()) throw Error(ErrorKind::kConfig, "empty value list");
  return out;
}

}  // namespace q2t::cli
