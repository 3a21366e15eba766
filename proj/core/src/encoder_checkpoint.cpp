#include "q2t/encoder_checkpoint.hpp"

#include <fmt/format.h>

#include "q2t/checksum.hpp"
#include "q2t/error.hpp"
#include "raw_array.hpp"

namespace q2t::graphormer {

namespace {

constexpr std::string_view kFormat = "q2t-encoder-v1";

std::string key(std::string_view prefix, std::string_view name) {
  return std::string(prefix) + std::string(name);
}

std::size_t read_size(const KeyValueFile& in, const std::string& k, std::size_t fallback) {
  const auto value = in.find(k);
  if (!value) return fallback;
  const auto parsed = parse_int(*value, k);
  if (parsed < 0) throw Error(ErrorKind::kConfig, fmt::format("{} must be non-negative", k));
  return static_cast<std::size_t>(parsed);
}

double read_real(const KeyValueFile& in, const std::string& k, double fallback) {
  const auto value = in.find(k);
  return value ? parse_double(*value, k) : fallback;
}

}  // namespace

void write_encoder_config(const EncoderConfig& c, KeyValueFile& out, std::string_view prefix) {
  out.set(key(prefix, "num_layers"), std::to_string(c.num_layers));
  out.set(key(prefix, "width"), std::to_string(c.width));
  out.set(key(prefix, "num_heads"), std::to_string(c.num_heads));
  out.set(key(prefix, "ffn_width"), std::to_string(c.ffn_width));
  out.set(key(prefix, "dropout"), format_double(c.dropout));
  out.set(key(prefix, "encoding"), std::string(encoding::encoding_mode_name(c.encoding.mode)));
  out.set(key(prefix, "clamp"), std::to_string(c.encoding.clamp));
  out.set(key(prefix, "direction"),
          c.encoding.direction == encoding::DirectionRule::kLiteral ? "literal" : "signed");
  out.set(key(prefix, "negative_samples"), std::to_string(c.negative_samples));
  out.set(key(prefix, "label_smoothing"), format_double(c.label_smoothing));
  out.set(key(prefix, "init_noise"), format_double(c.init_noise));
  out.set(key(prefix, "seed"), std::to_string(c.seed));
}

EncoderConfig read_encoder_config(const KeyValueFile& in, std::string_view prefix) {
  EncoderConfig c;
  c.num_layers = read_size(in, key(prefix, "num_layers"), c.num_layers);
  c.width = read_size(in, key(prefix, "width"), c.width);
  c.num_heads = read_size(in, key(prefix, "num_heads"), c.num_heads);
  c.ffn_width = read_size(in, key(prefix, "ffn_width"), c.ffn_width);
  c.dropout = read_real(in, key(prefix, "dropout"), c.dropout);
  if (auto v = in.find(key(prefix, "encoding"))) c.encoding.mode = encoding::parse_encoding_mode(*v);
  c.encoding.clamp = static_cast<int>(read_size(in, key(prefix, "clamp"),
                                                static_cast<std::size_t>(c.encoding.clamp)));
  if (auto v = in.find(key(prefix, "direction"))) {
    if (*v == "literal") {
      c.encoding.direction = encoding::DirectionRule::kLiteral;
    } else if (*v == "signed") {
      c.encoding.direction = encoding::DirectionRule::kSigned;
    } else {
      throw Error(ErrorKind::kConfig, fmt::format("unknown direction rule '{}'", *v));
    }
  }
  c.negative_samples = read_size(in, key(prefix, "negative_samples"), c.negative_samples);
  c.label_smoothing = read_real(in, key(prefix, "label_smoothing"), c.label_smoothing);
  c.init_noise = read_real(in, key(prefix, "init_noise"), c.init_noise);
  c.seed = read_size(in, key(prefix, "seed"), c.seed);
  return c;
}

void round_to_storage(EncoderParams& params) {
  for (auto& t : tensors(params)) {
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] = static_cast<float>(t.data[i]);
  }
}

void save_encoder(const EncoderCheckpoint& checkpoint, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "tensors");
  auto params = checkpoint.params;
  KeyValueFile manifest;
  manifest.set("format", std::string(kFormat));
  manifest.set("kge_hash", checkpoint.kge_hash);
  manifest.set("kge_width", std::to_string(checkpoint.kge_width));
  manifest.set("dtype", "float32-le");
  write_encoder_config(checkpoint.config, manifest);
  Sha256 hasher;
  const auto list = tensors(params);
  manifest.set("tensor_count", std::to_string(list.size()));
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& t = list[i];
    const auto file = "tensors/" + t.name + ".f32";
    detail::write_f32({t.data, t.size}, dir / file, hasher);
    manifest.set(fmt::format("tensor.{}", i), fmt::format("{} {} {} {}", t.name, t.rows, t.cols, file));
  }
  manifest.set("sha256", hasher.hex_digest());
  manifest.write(dir / "manifest.txt");
}

EncoderCheckpoint load_encoder(const std::filesystem::path& dir, std::string_view kge_hash) {
  const auto manifest = KeyValueFile::read(dir / "manifest.txt");
  if (manifest.at("format") != kFormat) {
    throw Error(ErrorKind::kIntegrity, fmt::format("'{}' is not an encoder checkpoint (format '{}')",
                                                   dir.string(), manifest.at("format")));
  }
  if (manifest.at("kge_hash") != kge_hash) {
    throw Error(ErrorKind::kIntegrity,
                fmt::format("encoder '{}' was trained against KGE {}, got {}", dir.string(),
                            manifest.at("kge_hash"), kge_hash));
  }
  EncoderCheckpoint checkpoint;
  checkpoint.kge_hash = manifest.at("kge_hash");
  checkpoint.kge_width = static_cast<std::size_t>(manifest.at_int("kge_width"));
  checkpoint.config = read_encoder_config(manifest);
  checkpoint.params = init_params(checkpoint.config, checkpoint.kge_width);
  auto list = tensors(checkpoint.params);
  if (static_cast<std::size_t>(manifest.at_int("tensor_count")) != list.size()) {
    throw Error(ErrorKind::kShape, fmt::format("manifest lists {} tensors, config implies {}",
                                               manifest.at("tensor_count"), list.size()));
  }
  Sha256 hasher;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto fields = split(manifest.at(fmt::format("tensor.{}", i)), ' ');
    auto& t = list[i];
    if (fields.size() != 4 || fields[0] != t.name ||
        parse_int(fields[1], "rows") != t.rows || parse_int(fields[2], "cols") != t.cols) {
      throw Error(ErrorKind::kShape,
                  fmt::format("tensor {} entry '{}' does not match {} ({}x{})", i,
                              manifest.at(fmt::format("tensor.{}", i)), t.name, t.rows, t.cols));
    }
    const auto values = detail::read_f32(dir / fields[3], t.size, hasher);
    std::copy(values.begin(), values.end(), t.data);
  }
  const auto digest = hasher.hex_digest();
  if (digest != manifest.at("sha256")) {
    throw Error(ErrorKind::kIntegrity,
                fmt::format("encoder '{}' hash mismatch: manifest {}, content {}", dir.string(),
                            manifest.at("sha256"), digest));
  }
  return checkpoint;
}

}  // namespace q2t::graphormer
