#include "tiny_model.hpp"

#include <random>

namespace q2t::fixtures {

graphormer::EncoderConfig tiny_config(encoding::EncodingMode mode) {
  graphormer::EncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.width = 16;
  cfg.num_heads = 2;
  cfg.ffn_width = 16;
  cfg.dropout = 0.0;
  cfg.negative_samples = 6;
  cfg.label_smoothing = 0.3;
  cfg.encoding.mode = mode;
  cfg.seed = 12;
  return cfg;
}

kge::KgeModel tiny_kge(std::size_t num_entities, std::size_t num_relations) {
  auto model = kge::init_model(kge::ScorerKind::kComplEx, num_entities, num_relations, 8, 0.5, 77);
  model.round_to_storage();
  return model;
}

graphormer::EncoderParams perturbed_params(const graphormer::EncoderConfig& config,
                                           std::size_t kge_width, std::uint64_t seed) {
  auto params = graphormer::init_params(config, kge_width);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.2);
  for (auto& t : graphormer::tensors(params)) {
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] += noise(rng);
  }
  return params;
}

}  // namespace q2t::fixtures
