#include "v2a/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>

#include "CLI11.hpp"
#include "v2a/error.hpp"
#include "v2a/pipeline.hpp"

namespace v2a::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kTranscodeHint =
    "Inputs must be uncompressed: video as .y4m (or .rvid), audio as 16-bit PCM .wav.\n"
    "Convert compressed media first, for example:\n"
    "  ffmpeg -i in.mp4 -pix_fmt yuv420p -an clip.y4m\n"
    "  ffmpeg -i in.mp4 -vn -ac 1 -ar 8000 -c:a pcm_s16le clip.wav\n"
    "Give both files the same stem so they pair up in a dataset directory.";

constexpr double kGradTolerance = 1e-3;

struct Options {
  std::string config, data, ckpt, video, audio, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::size_t seeds = 1;
};

Config resolve_config(const Options& o) {
  Config c = o.config.empty() ? Config{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  c.validate();
  return c;
}

void report_training(const TrainResult& r, const char* stage, std::ostream& err) {
  err << stage << ": " << r.log.size() << " steps";
  if (r.log.size() > 0) err << ", final total " << r.log.records().back().total;
  err << "\n" << stage << ": wrote " << r.latest.string() << "\n";
}

int grad_check(const Options& o, std::ostream& out) {
  const std::uint64_t first = o.seed.value_or(0);
  double worst = 0;
  for (std::uint64_t s = first; s < first + o.seeds; ++s)
    for (const auto& e : run_grad_check_suite(s)) {
      char line[160];
      std::snprintf(line, sizeof line, "seed %llu  %-36s %.3e %s\n", static_cast<unsigned long long>(s),
                    e.name.c_str(), e.max_relative_error, e.max_relative_error < kGradTolerance ? "ok" : "FAIL");
      out << line;
      worst = std::max(worst, e.max_relative_error);
    }
  out << "worst relative error " << worst << (worst < kGradTolerance ? " (pass)" : " (fail)") << "\n";
  return worst < kGradTolerance ? kOk : kNumeric;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Silent video to audio synthesis: VQ-VAE video encoder plus fully connected audio decoder."};
  app.name("v2a");
  app.footer(kTranscodeHint);
  app.require_subcommand(1, 1);

  Options o;
  auto add = [&](const std::string& name, const std::string& about) {
    auto* sub = app.add_subcommand(name, about);
    sub->footer(kTranscodeHint);
    return sub;
  };
  auto config_flag = [&](CLI::App* s) { s->add_option("--config", o.config, "key = value config file"); };
  auto overrides = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "overrides the config seed");
    s->add_option("--epochs", o.epochs, "overrides the config epoch count")->check(CLI::PositiveNumber);
  };

  auto* preprocess = add("preprocess", "Resize, resample and write <out>/<stem>.rvid (+ .wav)");
  config_flag(preprocess);
  preprocess->add_option("--video", o.video, "input .y4m or .rvid")->required();
  preprocess->add_option("--audio", o.audio, "input PCM16 .wav");
  preprocess->add_option("--out", o.out, "dataset directory")->required();

  auto* train_enc = add("train-encoder", "Train the VQ-VAE (stage 1)");
  config_flag(train_enc);
  train_enc->add_option("--data", o.data, "dataset directory")->required();
  train_enc->add_option("--out", o.out, "checkpoint directory")->required();
  overrides(train_enc);

  auto* train_dec = add("train-decoder", "Train the audio decoder on a frozen encoder (stage 2)");
  config_flag(train_dec);
  train_dec->add_option("--data", o.data, "dataset directory")->required();
  train_dec->add_option("--ckpt", o.ckpt, "encoder checkpoint from train-encoder")->required();
  train_dec->add_option("--out", o.out, "checkpoint directory")->required();
  overrides(train_dec);

  auto* infer_cmd = add("infer", "Synthesise a WAV for a silent video");
  infer_cmd->add_option("--ckpt", o.ckpt, "full checkpoint from train-decoder")->required();
  infer_cmd->add_option("--video", o.video, "input .y4m or .rvid")->required();
  infer_cmd->add_option("--out", o.out, "output .wav")->required();

  auto* eval_cmd = add("eval", "Audio MSE, reconstruction MSE and codebook usage on a dataset");
  eval_cmd->add_option("--ckpt", o.ckpt, "encoder or full checkpoint")->required();
  eval_cmd->add_option("--data", o.data, "dataset directory")->required();
  eval_cmd->add_option("--out", o.out, "metrics JSON file (default: standard output)");

  auto* export_cmd = add("export-artifacts", "Write frames, reconstructions and code-grid images");
  export_cmd->add_option("--ckpt", o.ckpt, "encoder or full checkpoint")->required();
  export_cmd->add_option("--video", o.video, "input .y4m or .rvid")->required();
  export_cmd->add_option("--out", o.out, "output directory")->required();

  auto* grad = add("grad-check", "Finite-difference check of every differentiable operation");
  grad->add_option("--seed", o.seed, "first seed (default 0)");
  grad->add_option("--seeds", o.seeds, "number of seeds")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (preprocess->parsed()) {
      const auto audio = o.audio.empty() ? std::nullopt : std::optional<fs::path>(o.audio);
      for (const auto& p : preprocess_files(resolve_config(o), o.video, audio, o.out))
        err << "preprocess: wrote " << p.string() << "\n";
    } else if (train_enc->parsed()) {
      report_training(train_encoder(resolve_config(o), o.data, o.out), "train-encoder", err);
    } else if (train_dec->parsed()) {
      report_training(train_decoder(resolve_config(o), o.data, o.ckpt, o.out), "train-decoder", err);
    } else if (infer_cmd->parsed()) {
      infer(o.ckpt, o.video, o.out);
      err << "infer: wrote " << o.out << "\n";
    } else if (eval_cmd->parsed()) {
      const auto json = evaluate(o.ckpt, o.data).to_json();
      if (o.out.empty()) {
        out << json;
      } else {
        write_file_atomic(o.out, json);
        err << "eval: wrote " << o.out << "\n";
      }
    } else if (export_cmd->parsed()) {
      const auto files = export_artifacts(o.ckpt, o.video, o.out);
      err << "export-artifacts: wrote " << files.size() << " files to " << o.out << "\n";
    } else if (grad->parsed()) {
      return grad_check(o, out);
    }
    return kOk;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
}

}  // namespace v2a::cli
