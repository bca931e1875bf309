#include "v2a/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "v2a/error.hpp"

namespace v2a {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size())
    throw ValidationError(std::string(key) + ": expected a non-negative integer, got '" +
                          std::string(text) + "'");
  return value;
}

double parse_real(std::string_view key, std::string_view text) {
  const std::string copy(text);
  char* end = nullptr;
  const double value = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size() || !std::isfinite(value))
    throw ValidationError(std::string(key) + ": expected a finite number, got '" + copy + "'");
  return value;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(Config&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"width", [](Config& c, std::string_view v) { c.width = parse_unsigned("width", v); }},
      {"height", [](Config& c, std::string_view v) { c.height = parse_unsigned("height", v); }},
      {"fps",
       [](Config& c, std::string_view v) {
         const auto slash = v.find('/');
         const auto num = parse_unsigned("fps", v.substr(0, slash));
         const auto den = slash == std::string_view::npos ? 1 : parse_unsigned("fps", v.substr(slash + 1));
         if (num == 0 || den == 0 || num > UINT32_MAX || den > UINT32_MAX)
           throw ValidationError("fps: must be a positive integer or ratio");
         c.fps = {static_cast<std::uint32_t>(num), static_cast<std::uint32_t>(den)};
       }},
      {"segment_seconds",
       [](Config& c, std::string_view v) { c.segment_seconds = parse_unsigned("segment_seconds", v); }},
      {"sample_rate",
       [](Config& c, std::string_view v) {
         const auto r = parse_unsigned("sample_rate", v);
         if (r > UINT32_MAX) throw ValidationError("sample_rate: out of range");
         c.sample_rate = static_cast<std::uint32_t>(r);
       }},
      {"batch_max", [](Config& c, std::string_view v) { c.batch_max = parse_unsigned("batch_max", v); }},
      {"K", [](Config& c, std::string_view v) { c.codebook_size = parse_unsigned("K", v); }},
      {"D", [](Config& c, std::string_view v) { c.embedding_dim = parse_unsigned("D", v); }},
      {"hidden_channels",
       [](Config& c, std::string_view v) { c.hidden_channels = parse_unsigned("hidden_channels", v); }},
      {"decoder_hidden",
       [](Config& c, std::string_view v) {
         c.decoder_hidden.clear();
         const std::string list = std::string(trim(v));
         if (list.empty()) return;
         std::stringstream ss(list);
         std::string item;
         while (std::getline(ss, item, ','))
           c.decoder_hidden.push_back(parse_unsigned("decoder_hidden", trim(item)));
       }},
      {"beta", [](Config& c, std::string_view v) { c.beta = parse_real("beta", v); }},
      {"lr_encoder", [](Config& c, std::string_view v) { c.lr_encoder = parse_real("lr_encoder", v); }},
      {"lr_decoder", [](Config& c, std::string_view v) { c.lr_decoder = parse_real("lr_decoder", v); }},
      {"epochs", [](Config& c, std::string_view v) { c.epochs = parse_unsigned("epochs", v); }},
      {"seed", [](Config& c, std::string_view v) { c.seed = parse_unsigned("seed", v); }},
      {"optimizer",
       [](Config& c, std::string_view v) {
         if (v == "adam") c.optimizer = OptimizerMode::adaptive;
         else if (v == "sgd") c.optimizer = OptimizerMode::gradient_descent;
         else throw ValidationError("optimizer: expected 'adam' or 'sgd', got '" + std::string(v) + "'");
       }},
  };
  return table;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

void Config::validate() const {
  require(width >= 8 && width % kDownsample == 0, "width: must be at least 8 and divisible by 4, got " + std::to_string(width));
  require(height >= 8 && height % kDownsample == 0, "height: must be at least 8 and divisible by 4, got " + std::to_string(height));
  require(fps.num > 0 && fps.den > 0, "fps: must be positive");
  require(segment_seconds > 0, "segment_seconds: must be positive");
  require((segment_seconds * fps.num) % fps.den == 0, "segment_seconds: window is not a whole number of frames");
  require(segment_frames() % kDownsample == 0,
          "segment_seconds: segment frame count " + std::to_string(segment_frames()) + " is not divisible by 4");
  require(sample_rate > 0, "sample_rate: must be positive");
  require(batch_max == 1 || batch_max == 2, "batch_max: batches hold at most 2 segments, got " + std::to_string(batch_max));
  require(codebook_size >= 2, "K: must be at least 2");
  require(embedding_dim >= 1, "D: must be at least 1");
  require(hidden_channels >= 1, "hidden_channels: must be at least 1");
  for (auto h : decoder_hidden) require(h >= 1, "decoder_hidden: widths must be positive");
  require(beta >= 0, "beta: must be non-negative");
  require(lr_encoder > 0, "lr_encoder: must be positive");
  require(lr_decoder > 0, "lr_decoder: must be positive");
  require(epochs >= 1, "epochs: must be at least 1");
}

std::size_t Config::segment_frames() const { return segment_seconds * fps.num / fps.den; }
std::size_t Config::segment_samples() const { return segment_seconds * sample_rate; }

std::size_t Config::latent_width() const {
  return (segment_frames() / kDownsample) * (height / kDownsample) * (width / kDownsample) * embedding_dim;
}

VqVaeConfig Config::vqvae() const { return {hidden_channels, embedding_dim, codebook_size, beta}; }

OptimizerSettings Config::optimizer_settings(double learning_rate) const {
  OptimizerSettings s;
  s.mode = optimizer;
  s.learning_rate = learning_rate;
  return s;
}

std::string Config::to_text() const {
  std::string hidden;
  for (std::size_t i = 0; i < decoder_hidden.size(); ++i)
    hidden += (i ? "," : "") + std::to_string(decoder_hidden[i]);
  std::ostringstream out;
  out << "width = " << width << "\n"
      << "height = " << height << "\n"
      << "fps = " << fps.num << "/" << fps.den << "\n"
      << "segment_seconds = " << segment_seconds << "\n"
      << "sample_rate = " << sample_rate << "\n"
      << "batch_max = " << batch_max << "\n"
      << "K = " << codebook_size << "\n"
      << "D = " << embedding_dim << "\n"
      << "hidden_channels = " << hidden_channels << "\n"
      << "decoder_hidden = " << hidden << "\n"
      << "beta = " << format_real(beta) << "\n"
      << "lr_encoder = " << format_real(lr_encoder) << "\n"
      << "lr_decoder = " << format_real(lr_decoder) << "\n"
      << "epochs = " << epochs << "\n"
      << "seed = " << seed << "\n"
      << "optimizer = " << (optimizer == OptimizerMode::adaptive ? "adam" : "sgd") << "\n";
  return out.str();
}

Config parse_config(std::string_view text) {
  Config config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw UnknownKeyError(std::string(key));
    try {
      it->second(config, value);
    } catch (const UnknownKeyError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

Config load_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const UnknownKeyError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace v2a
