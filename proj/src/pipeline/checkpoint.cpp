#include "v2a/checkpoint.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <set>

#include "json.hpp"
#include "v2a/error.hpp"

namespace v2a {
namespace {

using json = nlohmann::json;

constexpr std::string_view kMagicStem = "SSYN";
constexpr std::string_view kMagic = "SSYN1\n";

json config_to_json(const Config& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"fps", {c.fps.num, c.fps.den}},
          {"segment_seconds", c.segment_seconds},
          {"sample_rate", c.sample_rate},
          {"batch_max", c.batch_max},
          {"K", c.codebook_size},
          {"D", c.embedding_dim},
          {"hidden_channels", c.hidden_channels},
          {"decoder_hidden", c.decoder_hidden},
          {"beta", c.beta},
          {"lr_encoder", c.lr_encoder},
          {"lr_decoder", c.lr_decoder},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"optimizer", c.optimizer == OptimizerMode::adaptive ? "adam" : "sgd"}};
}

Config config_from_json(const json& j) {
  Config c;
  c.width = j.at("width").get<std::size_t>();
  c.height = j.at("height").get<std::size_t>();
  c.fps = {j.at("fps").at(0).get<std::uint32_t>(), j.at("fps").at(1).get<std::uint32_t>()};
  c.segment_seconds = j.at("segment_seconds").get<std::size_t>();
  c.sample_rate = j.at("sample_rate").get<std::uint32_t>();
  c.batch_max = j.at("batch_max").get<std::size_t>();
  c.codebook_size = j.at("K").get<std::size_t>();
  c.embedding_dim = j.at("D").get<std::size_t>();
  c.hidden_channels = j.at("hidden_channels").get<std::size_t>();
  c.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
  c.beta = j.at("beta").get<double>();
  c.lr_encoder = j.at("lr_encoder").get<double>();
  c.lr_decoder = j.at("lr_decoder").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto opt = j.at("optimizer").get<std::string>();
  if (opt != "adam" && opt != "sgd") throw CheckpointError("checkpoint: unknown optimizer '" + opt + "'");
  c.optimizer = opt == "adam" ? OptimizerMode::adaptive : OptimizerMode::gradient_descent;
  c.validate();
  return c;
}

Stage stage_from_string(const std::string& s) {
  if (s == "encoder") return Stage::encoder;
  if (s == "decoder") return Stage::decoder;
  if (s == "full") return Stage::full;
  throw CheckpointError("checkpoint: unknown stage '" + s + "'");
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

bool has_vqvae(Stage s) { return s == Stage::encoder || s == Stage::full; }
bool has_decoder(Stage s) { return s == Stage::decoder || s == Stage::full; }

}  // namespace

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::encoder: return "encoder";
    case Stage::decoder: return "decoder";
    case Stage::full: return "full";
  }
  return "?";
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.tensor;
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

Bytes encode_checkpoint(const Checkpoint& checkpoint) {
  json directory = json::array();
  std::set<std::string> names;
  std::size_t payload_bytes = 0;
  for (const auto& t : checkpoint.tensors) {
    if (!names.insert(t.name).second) throw CheckpointError("duplicate tensor name '" + t.name + "'");
    for (float v : t.tensor.data())
      if (!std::isfinite(v)) throw NumericError("tensor '" + t.name + "' holds a non-finite value");
    directory.push_back({{"name", t.name}, {"shape", t.tensor.shape()}});
    payload_bytes += t.tensor.size() * 4;
  }
  const json header = {{"format", Checkpoint::kFormatVersion},
                       {"stage", to_string(checkpoint.stage)},
                       {"config", config_to_json(checkpoint.config)},
                       {"tensors", directory}};
  const std::string text = header.dump();

  Bytes out(kMagic.begin(), kMagic.end());
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  const std::size_t payload_start = out.size();
  out.reserve(out.size() + payload_bytes + 4);
  for (const auto& t : checkpoint.tensors)
    for (float v : t.tensor.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(out, bits);
    }
  put_u32(out, crc32_of(std::span<const std::uint8_t>(out).subspan(payload_start)));
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size()) throw TruncationError("checkpoint: file shorter than its magic");
  const std::string_view magic(reinterpret_cast<const char*>(bytes.data()), kMagic.size());
  if (magic.substr(0, kMagicStem.size()) != kMagicStem)
    throw CheckpointError("checkpoint: bad magic");
  if (magic != kMagic)
    throw VersionMismatchError("checkpoint: container version '" +
                               std::string(magic.substr(kMagicStem.size(), magic.size() - kMagicStem.size() - 1)) +
                               "' is not supported (expected 1)");
  std::size_t offset = kMagic.size();
  if (bytes.size() < offset + 8) throw TruncationError("checkpoint: header length missing");
  const std::uint64_t header_len = get_u64(bytes, offset);
  offset += 8;
  if (header_len > bytes.size() - offset) throw TruncationError("checkpoint: header truncated");

  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                         bytes.begin() + static_cast<std::ptrdiff_t>(offset + header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: unreadable header: ") + e.what());
  }
  offset += header_len;

  Checkpoint result;
  std::vector<std::pair<std::string, Shape>> directory;
  try {
    const int version = header.at("format").get<int>();
    if (version != Checkpoint::kFormatVersion)
      throw VersionMismatchError("checkpoint: format version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(Checkpoint::kFormatVersion) + ")");
    result.stage = stage_from_string(header.at("stage").get<std::string>());
    result.config = config_from_json(header.at("config"));
    for (const auto& entry : header.at("tensors"))
      directory.emplace_back(entry.at("name").get<std::string>(), entry.at("shape").get<Shape>());
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ValidationError& e) {
    throw CheckpointError(std::string("checkpoint: invalid config snapshot: ") + e.what());
  }

  std::size_t payload_bytes = 0;
  std::set<std::string> names;
  for (const auto& [name, shape] : directory) {
    if (!names.insert(name).second) throw CheckpointError("checkpoint: duplicate tensor '" + name + "'");
    if (shape.empty() && name.empty()) throw CheckpointError("checkpoint: unnamed tensor");
    for (auto e : shape)
      if (e == 0) throw CheckpointError("checkpoint: tensor '" + name + "' has an empty extent");
    payload_bytes += numel(shape) * 4;
  }
  const std::size_t expected = offset + payload_bytes + 4;
  if (bytes.size() < expected)
    throw TruncationError("checkpoint: " + std::to_string(bytes.size()) + " bytes, directory needs " +
                          std::to_string(expected));
  if (bytes.size() > expected) throw CheckpointError("checkpoint: trailing bytes after checksum");
  const auto payload = bytes.subspan(offset, payload_bytes);
  if (crc32_of(payload) != get_u32(bytes, offset + payload_bytes))
    throw ChecksumError("checkpoint: payload checksum mismatch");

  std::size_t cursor = 0;
  for (auto& [name, shape] : directory) {
    std::vector<float> data(numel(shape));
    for (auto& v : data) {
      const std::uint32_t bits = get_u32(payload, cursor);
      std::memcpy(&v, &bits, 4);
      cursor += 4;
    }
    result.tensors.push_back({name, Tensor(shape, std::move(data), true)});
  }
  return result;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const TruncationError& e) {
    throw TruncationError(path.string() + ": " + e.what());
  } catch (const ChecksumError& e) {
    throw ChecksumError(path.string() + ": " + e.what());
  } catch (const VersionMismatchError& e) {
    throw VersionMismatchError(path.string() + ": " + e.what());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

Checkpoint make_checkpoint(const Config& config, const VqVae<float>* vqvae,
                           const AudioDecoderNet<float>* decoder) {
  if (!vqvae && !decoder) throw ContractError("checkpoint needs at least one network");
  Checkpoint c;
  c.stage = vqvae && decoder ? Stage::full : vqvae ? Stage::encoder : Stage::decoder;
  c.config = config;
  if (vqvae)
    for (auto& p : vqvae->parameters()) c.tensors.push_back({p.name, p.tensor.detach()});
  if (decoder)
    for (auto& p : decoder->parameters()) c.tensors.push_back({p.name, p.tensor.detach()});
  return c;
}

VqVae<float> vqvae_from(const Checkpoint& checkpoint) {
  if (!has_vqvae(checkpoint.stage))
    throw StageError("a " + to_string(checkpoint.stage) + " checkpoint does not carry the encoder");
  auto model = VqVae<float>::create(checkpoint.config.vqvae(), 0);
  const auto names = model.parameters();
  const auto slots = model.parameter_slots();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& stored = checkpoint.tensor(names[i].name);
    if (stored.shape() != slots[i]->shape())
      throw CheckpointError("tensor '" + names[i].name + "' has shape " + to_string(stored.shape()) +
                            ", config implies " + to_string(slots[i]->shape()));
    *slots[i] = Tensor(stored.shape(), {stored.data().begin(), stored.data().end()}, true);
  }
  return model;
}

AudioDecoderNet<float> audio_decoder_from(const Checkpoint& checkpoint) {
  if (!has_decoder(checkpoint.stage))
    throw StageError("a " + to_string(checkpoint.stage) +
                     " checkpoint does not carry audio decoder weights; run train-decoder first");
  const auto& cfg = checkpoint.config;
  AudioDecoderNet<float> net;
  for (std::size_t i = 0; i <= cfg.decoder_hidden.size(); ++i) {
    const std::string stem = "audio_decoder.fc" + std::to_string(i + 1);
    const auto& w = checkpoint.tensor(stem + ".weight");
    const auto& b = checkpoint.tensor(stem + ".bias");
    net.weights.emplace_back(w.shape(), std::vector<float>(w.data().begin(), w.data().end()), true);
    net.biases.emplace_back(b.shape(), std::vector<float>(b.data().begin(), b.data().end()), true);
  }
  const std::size_t expected_in = cfg.latent_width();
  bool ok = net.input_width() == expected_in && net.output_width() == cfg.segment_samples();
  for (std::size_t i = 0; ok && i < net.weights.size(); ++i) {
    const std::size_t in = i == 0 ? expected_in : net.weights[i - 1].dim(0);
    const std::size_t out = i < cfg.decoder_hidden.size() ? cfg.decoder_hidden[i] : cfg.segment_samples();
    ok = net.weights[i].shape() == Shape{out, in} && net.biases[i].shape() == Shape{out};
  }
  if (!ok) throw CheckpointError("audio decoder tensors do not match the stored config");
  return net;
}

}  // namespace v2a
