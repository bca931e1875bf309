#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "v2a/checkpoint.hpp"
#include "v2a/config.hpp"
#include "v2a/grad_check.hpp"
#include "v2a/media.hpp"

namespace v2a {

// ---- dataset ---------------------------------------------------------------

// A video file (.y4m or .rvid) and, when present, the .wav sharing its stem.
struct DatasetItem {
  std::string stem;
  std::filesystem::path video;
  std::optional<std::filesystem::path> audio;
};

// Sorted by stem. DataError if the directory is missing or holds no video.
std::vector<DatasetItem> scan_dataset(const std::filesystem::path& dir);

// Resample to config fps, then resize to config width x height.
media::VideoClip preprocess_video(const media::VideoClip& clip, const Config& config);
// Integer-ratio reduction to the config sample rate.
media::AudioClip preprocess_audio(const media::AudioClip& clip, const Config& config);

// Training windows for every item, audio tanh-normalised. A missing audio
// track or misaligned durations raise AlignmentError naming the file.
std::vector<media::SegmentPair> load_training_pairs(const Config& config,
                                                    const std::filesystem::path& dir);

// ---- training --------------------------------------------------------------

struct TrainRecord {
  std::size_t step = 0;
  std::size_t batch = 0;  // segments in the step; not written to CSV
  std::optional<double> recon, quant, commit, audio_mse;
  double total = 0;
  double ms = 0;
};

class TrainLog {
 public:
  // ContractError unless step indices strictly increase.
  void append(const TrainRecord& record);
  const std::vector<TrainRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // Header `step,recon,quant,commit,audio_mse,total,ms`; inapplicable fields
  // are empty. Without timing the ms column is left empty so runs compare
  // byte for byte.
  std::string to_csv(bool with_timing = true) const;

 private:
  std::vector<TrainRecord> records_;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
  std::filesystem::path latest;  // path of the final checkpoint
};

// Stage 1. Writes encoder_epochNNN.ssyn per epoch, encoder_latest.ssyn and
// encoder_log.csv into out_dir. On a numeric abort the log so far and every
// completed epoch's checkpoint remain on disk.
TrainResult train_encoder(const Config& config, const std::filesystem::path& data_dir,
                          const std::filesystem::path& out_dir);

// Stage 2. The encoder checkpoint supplies the model shape; decoder-side
// settings (decoder_hidden, lr_decoder, epochs, seed, optimizer) come from
// `config`. Writes full_epochNNN.ssyn, full_latest.ssyn and decoder_log.csv.
// The encoder and codebook are verified unchanged at the end.
TrainResult train_decoder(const Config& config, const std::filesystem::path& data_dir,
                          const std::filesystem::path& encoder_checkpoint,
                          const std::filesystem::path& out_dir);

// ---- inference and evaluation ----------------------------------------------

// Reads only the video file; synthesises full-length audio and writes a WAV.
void infer(const std::filesystem::path& checkpoint, const std::filesystem::path& video,
           const std::filesystem::path& out_wav);

struct Metrics {
  std::size_t segments = 0;
  std::optional<double> audio_mse;  // normalised space, mean over segments
  double silence_mse = 0;           // all-zeros prediction, same space
  double recon_mse = 0;             // mean over segments
  std::vector<std::size_t> code_histogram;
  double codebook_usage = 0;  // fraction of the K codes that appear

  std::string to_json() const;
};

// Audio metrics need a full checkpoint; with an encoder checkpoint they are
// left empty. DataError on an empty evaluation set.
Metrics evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir);

// Per inference window NNN: segNNN_frame.ppm (first preprocessed frame),
// segNNN_recon.ppm (its reconstruction), segNNN_codes_tMMM.pgm (code grid per
// latent time slice). Returns the written paths.
std::vector<std::filesystem::path> export_artifacts(const std::filesystem::path& checkpoint,
                                                    const std::filesystem::path& video,
                                                    const std::filesystem::path& out_dir);

// Converts an input video (+ optional audio) into the dataset layout at the
// configured resolution, frame rate and sample rate: <out>/<stem>.rvid and
// <out>/<stem>.wav.
std::vector<std::filesystem::path> preprocess_files(const Config& config,
                                                    const std::filesystem::path& video,
                                                    const std::optional<std::filesystem::path>& audio,
                                                    const std::filesystem::path& out_dir);

// ---- verification ----------------------------------------------------------

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0;
};

// Finite-difference check (double precision, eps 1e-5) of every
// differentiable operation and of the frozen-assignment vqvae loss, on small
// random shapes drawn from `seed`.
std::vector<GradCheckEntry> run_grad_check_suite(std::uint64_t seed);

}  // namespace v2a
