#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "q2t/key_value.hpp"
#include "q2t/query_graphormer.hpp"

namespace q2t::graphormer {

// Writes every EncoderConfig field as "<prefix>name=value".
void write_encoder_config(const EncoderConfig& config, KeyValueFile& out,
                          std::string_view prefix = "encoder.");
// Reads the fields written above; missing keys keep their defaults.
EncoderConfig read_encoder_config(const KeyValueFile& in, std::string_view prefix = "encoder.");

struct EncoderCheckpoint {
  EncoderConfig config;
  EncoderParams params;
  std::size_t kge_width = 0;
  std::string kge_hash;  // content hash of the link predictor it was trained against
};

// manifest.txt plus one float32 file per tensor under tensors/.
void save_encoder(const EncoderCheckpoint& checkpoint, const std::filesystem::path& dir);

// Throws kIntegrity on a corrupted file or when `kge_hash` differs from the
// one recorded at training time.
EncoderCheckpoint load_encoder(const std::filesystem::path& dir, std::string_view kge_hash);

// Rounds every parameter to float32, the checkpoint storage precision.
void round_to_storage(EncoderParams& params);

}  // namespace q2t::graphormer
