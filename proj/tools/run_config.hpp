#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "q2t/key_value.hpp"
#include "q2t/link_predictor.hpp"
#include "q2t/query_graphormer.hpp"
#include "q2t/symbolic_engine.hpp"
#include "q2t/synthetic.hpp"
#include "q2t/trainer_eval.hpp"

namespace q2t::cli {

// Every tunable knob with its default. Later sources override earlier ones:
// built-in defaults, then --config files in order, then --set, then the
// dedicated flags (--seed, --device). Unknown keys are rejected.
class RunConfig {
 public:
  static RunConfig defaults();

  void merge(const KeyValueFile& file);
  void merge_file(const std::filesystem::path& path);
  // "key=value"
  void apply_override(std::string_view assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::size_t get_size(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::uint64_t seed() const;

  kg::SyntheticSpec synthetic() const;
  symbolic::SamplerConfig sampler() const;
  symbolic::GenerationCounts generation_counts() const;
  kge::PretrainConfig pretrain() const;
  graphormer::EncoderConfig encoder() const;
  trainer::TrainRunConfig train() const;

  const KeyValueFile& values() const { return values_; }
  // Config text that can be fed back through --config.
  std::string effective_text(std::string_view version, std::string_view command) const;

 private:
  KeyValueFile values_;
};

// "1p:1,2p:0.5"
std::map<query::QueryType, double> parse_type_mix(std::string_view text);
std::string format_type_mix(const std::map<query::QueryType, double>& mix);
// "1p,2p,3p"
std::vector<query::QueryType> parse_type_list(std::string_view text);
// "0,0.2,0.4"
std::vector<double> parse_value_list(std::string_view text);

}  // namespace q2t::cli
