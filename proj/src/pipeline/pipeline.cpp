#include "v2a/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>

#include "json.hpp"
#include "v2a/audiodec.hpp"
#include "v2a/error.hpp"
#include "v2a/vqvae.hpp"

namespace v2a {
namespace {

namespace fs = std::filesystem;

std::string numbered(const std::string& stem, std::size_t n, const char* ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", n);
  return stem + buf + ext;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// FNV-1a over the raw bytes of every tensor.
std::uint64_t fingerprint(const std::vector<NamedTensor<float>>& tensors) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& t : tensors) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.tensor.data().data());
    for (std::size_t i = 0; i < t.tensor.size() * sizeof(float); ++i) h = (h ^ p[i]) * 1099511628211ull;
  }
  return h;
}

media::VideoClip clip_from_tensor(const Tensor& video, std::size_t item, media::Fps fps) {
  const std::size_t t = video.dim(2), h = video.dim(3), w = video.dim(4), plane = h * w;
  std::vector<float> out(t * 3 * plane);
  const auto src = video.data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t f = 0; f < t; ++f)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(((item * 3 + c) * t + f) * plane), plane,
                  out.begin() + static_cast<std::ptrdiff_t>((f * 3 + c) * plane));
  return media::VideoClip(t, h, w, fps, std::move(out));
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

bool is_video(const fs::path& p) {
  const auto ext = p.extension();
  return ext == ".y4m" || ext == ".rvid";
}

template <typename Step>
void run_epochs(const Config& config, const std::vector<media::Batch>& batches, TrainLog& log,
                const fs::path& log_path, Step&& step, const std::function<void(std::size_t)>& on_epoch) {
  std::size_t index = 0;
  try {
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      for (const auto& batch : batches) {
        if (batch.size() > media::Batch::kMaxSize)
          throw ContractError("training batch of size " + std::to_string(batch.size()) + " exceeds 2");
        const auto start = std::chrono::steady_clock::now();
        TrainRecord record = step(batch);
        record.step = ++index;
        record.batch = batch.size();
        record.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        log.append(record);
      }
      on_epoch(epoch);
      write_file_atomic(log_path, log.to_csv());
    }
  } catch (const NumericError&) {
    write_file_atomic(log_path, log.to_csv());
    throw;
  }
}

}  // namespace

// ---- dataset ---------------------------------------------------------------

std::vector<DatasetItem> scan_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' does not exist");
  std::map<std::string, DatasetItem> items;
  std::set<std::string> audio;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    const std::string stem = p.stem().string();
    if (is_video(p)) {
      if (items.count(stem))
        throw DataError("dataset has two videos named '" + stem + "' in '" + dir.string() + "'");
      items[stem] = DatasetItem{stem, p, std::nullopt};
    } else if (p.extension() == ".wav") {
      audio.insert(stem);
    }
  }
  if (items.empty()) throw DataError("dataset directory '" + dir.string() + "' holds no .y4m or .rvid video");
  std::vector<DatasetItem> out;
  for (auto& [stem, item] : items) {
    if (audio.count(stem)) item.audio = dir / (stem + ".wav");
    out.push_back(item);
  }
  return out;
}

media::VideoClip preprocess_video(const media::VideoClip& clip, const Config& config) {
  const auto resampled = clip.fps() == config.fps ? clip : media::resample_fps(clip, config.fps);
  return media::resize_bilinear(resampled, config.width, config.height);
}

media::AudioClip preprocess_audio(const media::AudioClip& clip, const Config& config) {
  return media::decimate_audio(clip, config.sample_rate);
}

std::vector<media::SegmentPair> load_training_pairs(const Config& config, const fs::path& dir) {
  std::vector<media::SegmentPair> pairs;
  for (const auto& item : scan_dataset(dir)) {
    if (!item.audio)
      throw AlignmentError("training video '" + item.video.string() + "' has no audio track (expected '" +
                           (dir / (item.stem + ".wav")).string() + "')");
    const auto video = preprocess_video(media::read_video(item.video), config);
    const auto audio = preprocess_audio(media::read_wav(*item.audio), config);
    std::vector<media::SegmentPair> windows;
    try {
      windows = media::segment(video, audio, config.segment_seconds, media::SegmentMode::train);
    } catch (const AlignmentError& e) {
      throw AlignmentError(item.video.string() + ": " + e.what());
    }
    for (auto& w : windows) {
      w.audio = media::normalize_audio(*w.audio);
      w.normalized = true;
      pairs.push_back(std::move(w));
    }
  }
  return pairs;
}

// ---- training --------------------------------------------------------------

void TrainLog::append(const TrainRecord& record) {
  if (!records_.empty() && record.step <= records_.back().step)
    throw ContractError("train log steps must increase: " + std::to_string(record.step) + " after " +
                        std::to_string(records_.back().step));
  records_.push_back(record);
}

std::string TrainLog::to_csv(bool with_timing) const {
  std::string out = "step,recon,quant,commit,audio_mse,total,ms\n";
  auto field = [](const std::optional<double>& v) { return v ? format_value(*v) : std::string(); };
  for (const auto& r : records_) {
    out += std::to_string(r.step) + "," + field(r.recon) + "," + field(r.quant) + "," + field(r.commit) + "," +
           field(r.audio_mse) + "," + format_value(r.total) + "," +
           (with_timing ? format_value(r.ms) : std::string()) + "\n";
  }
  return out;
}

TrainResult train_encoder(const Config& config, const fs::path& data_dir, const fs::path& out_dir) {
  config.validate();
  auto pairs = load_training_pairs(config, data_dir);
  if (pairs.empty())
    throw DataError("dataset '" + data_dir.string() + "' yields no complete " +
                    std::to_string(config.segment_seconds) + " s training segment");
  const auto batches = media::make_batches(std::move(pairs), config.batch_max);
  ensure_directory(out_dir);

  auto model = VqVae<float>::create(config.vqvae(), config.seed);
  Optimizer<float> optimizer(config.optimizer_settings(config.lr_encoder));
  TrainResult result;
  run_epochs(
      config, batches, result.log, out_dir / "encoder_log.csv",
      [&](const media::Batch& batch) {
        const auto l = vqvae_train_step(model, batch, optimizer);
        TrainRecord r;
        r.recon = l.recon;
        r.quant = l.quant;
        r.commit = l.commit;
        r.total = l.total;
        return r;
      },
      [&](std::size_t epoch) {
        result.checkpoint = make_checkpoint(config, &model, nullptr);
        save_checkpoint(result.checkpoint, out_dir / numbered("encoder_epoch", epoch, ".ssyn"));
        result.latest = out_dir / "encoder_latest.ssyn";
        save_checkpoint(result.checkpoint, result.latest);
      });
  return result;
}

TrainResult train_decoder(const Config& config, const fs::path& data_dir, const fs::path& encoder_checkpoint,
                          const fs::path& out_dir) {
  const auto stored = load_checkpoint(encoder_checkpoint);
  const auto model = vqvae_from(stored);
  const Config& base = stored.config;
  std::vector<std::string> mismatched;
  if (config.width != base.width) mismatched.push_back("width");
  if (config.height != base.height) mismatched.push_back("height");
  if (!(config.fps == base.fps)) mismatched.push_back("fps");
  if (config.segment_seconds != base.segment_seconds) mismatched.push_back("segment_seconds");
  if (config.codebook_size != base.codebook_size) mismatched.push_back("K");
  if (config.embedding_dim != base.embedding_dim) mismatched.push_back("D");
  if (config.hidden_channels != base.hidden_channels) mismatched.push_back("hidden_channels");
  if (!mismatched.empty()) {
    std::string keys;
    for (const auto& k : mismatched) keys += (keys.empty() ? "" : ", ") + k;
    throw ConfigError("config disagrees with the encoder checkpoint on: " + keys);
  }
  Config merged = config;
  merged.beta = base.beta;
  merged.lr_encoder = base.lr_encoder;
  merged.validate();

  auto pairs = load_training_pairs(merged, data_dir);
  if (pairs.empty())
    throw DataError("dataset '" + data_dir.string() + "' yields no complete " +
                    std::to_string(merged.segment_seconds) + " s training segment");
  const auto batches = media::make_batches(std::move(pairs), merged.batch_max);
  ensure_directory(out_dir);

  const auto frozen_print = fingerprint(model.parameters());
  auto net = AudioDecoderNet<float>::create(merged.latent_width(), merged.decoder_hidden,
                                            merged.segment_samples(), merged.seed);
  Optimizer<float> optimizer(merged.optimizer_settings(merged.lr_decoder));
  TrainResult result;
  run_epochs(
      merged, batches, result.log, out_dir / "decoder_log.csv",
      [&](const media::Batch& batch) {
        const auto l = audiodec_train_step(net, model, batch, optimizer);
        TrainRecord r;
        r.audio_mse = l.audio_mse;
        r.total = l.audio_mse;
        return r;
      },
      [&](std::size_t epoch) {
        if (fingerprint(model.parameters()) != frozen_print)
          throw ContractError("encoder or codebook changed during decoder training");
        result.checkpoint = make_checkpoint(merged, &model, &net);
        save_checkpoint(result.checkpoint, out_dir / numbered("full_epoch", epoch, ".ssyn"));
        result.latest = out_dir / "full_latest.ssyn";
        save_checkpoint(result.checkpoint, result.latest);
      });
  return result;
}

// ---- inference and evaluation ----------------------------------------------

void infer(const fs::path& checkpoint, const fs::path& video, const fs::path& out_wav) {
  const auto stored = load_checkpoint(checkpoint);
  const auto net = audio_decoder_from(stored);
  const auto model = vqvae_from(stored);
  const auto& cfg = stored.config;
  const auto clip = preprocess_video(media::read_video(video), cfg);
  const auto audio = synthesize_long(net, model, clip, cfg.segment_seconds, cfg.sample_rate);
  media::write_wav(audio, out_wav);
}

std::string Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["segments"] = segments;
  j["audio_mse"] = audio_mse ? nlohmann::ordered_json(*audio_mse) : nlohmann::ordered_json(nullptr);
  j["silence_mse"] = silence_mse;
  j["recon_mse"] = recon_mse;
  j["codebook_usage"] = codebook_usage;
  j["code_histogram"] = code_histogram;
  return j.dump(2) + "\n";
}

Metrics evaluate(const fs::path& checkpoint, const fs::path& data_dir) {
  const auto stored = load_checkpoint(checkpoint);
  const auto& cfg = stored.config;
  const auto model = vqvae_from(stored);
  std::optional<AudioDecoderNet<float>> net;
  if (stored.stage == Stage::full) net = audio_decoder_from(stored);

  const auto pairs = load_training_pairs(cfg, data_dir);
  if (pairs.empty()) throw DataError("evaluation set '" + data_dir.string() + "' has no complete segment");

  NoGradGuard<float> no_grad;
  Metrics m;
  m.segments = pairs.size();
  m.code_histogram.assign(cfg.codebook_size, 0);
  double audio_sum = 0, silence_sum = 0, recon_sum = 0;
  for (const auto& pair : pairs) {
    const media::Batch one({pair});
    const auto video = video_batch_tensor(one);
    const auto target = audio_batch_tensor(one);
    const auto q = quantize(encode(model.encoder, video), model.codebook);
    for (auto idx : q.codes.indices) ++m.code_histogram[idx];
    recon_sum += mse(reconstruct(model.decoder, q.z_q), video).item();
    silence_sum += mse(Tensor::zeros(target.shape()), target).item();
    if (net) audio_sum += mse(synthesize(*net, q.z_q), target).item();
  }
  const double n = static_cast<double>(pairs.size());
  m.recon_mse = recon_sum / n;
  m.silence_mse = silence_sum / n;
  if (net) m.audio_mse = audio_sum / n;
  const auto used = std::count_if(m.code_histogram.begin(), m.code_histogram.end(), [](auto c) { return c > 0; });
  m.codebook_usage = static_cast<double>(used) / static_cast<double>(cfg.codebook_size);
  return m;
}

std::vector<fs::path> export_artifacts(const fs::path& checkpoint, const fs::path& video, const fs::path& out_dir) {
  const auto stored = load_checkpoint(checkpoint);
  const auto& cfg = stored.config;
  const auto model = vqvae_from(stored);
  const auto clip = preprocess_video(media::read_video(video), cfg);
  const auto windows = media::segment(clip, std::nullopt, cfg.segment_seconds, media::SegmentMode::infer);
  ensure_directory(out_dir);

  NoGradGuard<float> no_grad;
  std::vector<fs::path> written;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto padded = pad_for_encoder(windows[w].video);
    const auto stem = out_dir / numbered("seg", w, "");
    auto frame_path = stem;
    frame_path += "_frame.ppm";
    media::write_frame_ppm(padded, 0, frame_path);
    written.push_back(frame_path);

    const auto tensor = video_batch_tensor(media::Batch({media::SegmentPair{padded, std::nullopt, false, 0, 0}}));
    const auto q = quantize(encode(model.encoder, tensor), model.codebook);
    const auto recon = clip_from_tensor(reconstruct(model.decoder, q.z_q), 0, cfg.fps);
    auto recon_path = stem;
    recon_path += "_recon.ppm";
    media::write_frame_ppm(recon, 0, recon_path);
    written.push_back(recon_path);

    auto code_stem = stem;
    code_stem += "_codes";
    for (auto& p : media::export_code_image(q.codes, 0, code_stem)) written.push_back(std::move(p));
  }
  return written;
}

std::vector<fs::path> preprocess_files(const Config& config, const fs::path& video,
                                       const std::optional<fs::path>& audio, const fs::path& out_dir) {
  config.validate();
  const auto clip = preprocess_video(media::read_video(video), config);
  std::optional<media::AudioClip> wave;
  if (audio) wave = preprocess_audio(media::read_wav(*audio), config);
  ensure_directory(out_dir);
  std::vector<fs::path> written;
  const auto stem = video.stem().string();
  written.push_back(out_dir / (stem + ".rvid"));
  media::write_rawvideo(clip, written.back());
  if (wave) {
    written.push_back(out_dir / (stem + ".wav"));
    media::write_wav(*wave, written.back());
  }
  return written;
}

}  // namespace v2a
