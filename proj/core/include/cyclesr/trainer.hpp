#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cyclesr/data.hpp"
#include "cyclesr/imagecore.hpp"
#include "cyclesr/losses.hpp"
#include "cyclesr/nets.hpp"

namespace cyclesr {

enum class TrainMode { kCycleSr, kCycleSrGan, kSrSyn, kSrPaired };
std::string to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view text);
/// cyclesr and cyclesrgan train the translator; the baselines train SR only.
bool is_cycle_mode(TrainMode mode);

struct TrainConfig {
  int batch = 32;
  int hr_patch = 120;
  int scale = 4;
  /// Counted from the first pretraining epoch.
  int epochs_total = 200;
  int decay_start_epoch = 100;
  int pretrain_epochs = 5;
  double lr_cyclegan = 2e-4;
  double lr_sr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double grad_clip_norm = 50.0;
  LossWeights weights;
  TrainMode mode = TrainMode::kCycleSr;
  std::uint64_t seed = 0;
  int patches_per_image = 1;
  bool augment = true;
  /// "random" (fixed random conv features), "identity" (pixel space) or a
  /// path to a TorchScript feature network.
  std::string perceptual = "random";
};

void validate(const TrainConfig& config);

/// Linear decay schedule: `base` before `decay_start`, then linearly down to
/// zero at `total`.
double lr_at(int epoch, double base, int decay_start, int total);

/// Rescales all gradients of `params` so their global L2 norm is at most
/// `max_norm`. Returns the factor applied (1 when untouched).
double clip_gradients(const std::vector<torch::Tensor>& params, double max_norm);

/// Loss weights actually used for stage 2 in `mode`: cyclesr drops the
/// adversarial and perceptual SR terms.
LossWeights effective_weights(const LossWeights& weights, TrainMode mode);

/// Builds the extractor named by `TrainConfig::perceptual`. "random" uses a
/// seeded extractor derived from `seed`.
ExtractorPtr make_extractor(const std::string& kind, std::uint64_t seed);

/// Networks of one run; members not used by the mode stay null.
struct Models {
  NetworkPtr g_s2r;
  NetworkPtr g_r2s;
  NetworkPtr d_s;
  NetworkPtr d_r;
  NetworkPtr g_l2h;
  NetworkPtr d_h;

  /// Non-null networks in a fixed order, with checkpoint names.
  std::vector<std::pair<std::string, NetworkPtr>> named() const;
};

Models build_models(const ModelSpec& spec, TrainMode mode, std::uint64_t seed);

/// A loss became NaN or infinite; training stops instead of skipping.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::int64_t step, LossReport report);
  std::int64_t step() const { return step_; }
  const LossReport& report() const { return report_; }

 private:
  std::int64_t step_;
  LossReport report_;
};

struct StepRecord {
  std::int64_t step = 0;  // 1-based global step index
  int epoch = 0;          // 0-based epoch the step belongs to
  std::string phase;      // "pretrain", "joint" or "baseline"
  LossReport losses;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  /// Called with the number of completed epochs.
  std::function<void(int)> on_epoch_end;
};

/// Owns the networks, optimizers and counters of one run.
///
/// Optimizer groups: CycleGAN generators and critics use lr_cyclegan, the
/// SR network and its critic use lr_sr. Each group is clipped separately.
class Trainer {
 public:
  Trainer(ModelSpec spec, TrainConfig config);

  const ModelSpec& spec() const { return spec_; }
  const TrainConfig& config() const { return config_; }
  Models& models() { return models_; }
  /// Completed epochs.
  int epoch() const { return epoch_; }
  /// Completed optimization steps.
  std::int64_t step() const { return step_; }
  void set_extractor(ExtractorPtr extractor) { extractor_ = std::move(extractor); }

  /// Sets optimizer learning rates for `epoch` per lr_at.
  void apply_schedule(int epoch);

  /// One pretraining step: CycleGAN alone on stage-1 losses, SR alone on
  /// (lr_syn, hr) with lambda_mse * MSE.
  LossReport pretrain_step(const TrainBatch& batch);
  /// One joint step: generators on stage1_g + stage2_g with the SR input
  /// G_s2r(lr_syn), then critics on their objectives.
  LossReport joint_step(const TrainBatch& batch);
  /// One supervised step of the SR network on (batch.lr_syn, batch.hr).
  LossReport baseline_step(const TrainBatch& batch);

  /// Runs pretraining epochs up to pretrain_epochs (cycle modes only).
  void pretrain(const Dataset& data, const TrainHooks& hooks = {});
  /// Runs joint epochs up to epochs_total (cycle modes only).
  void train_joint(const Dataset& data, const TrainHooks& hooks = {});
  /// Runs supervised epochs up to epochs_total (baseline modes only).
  void train_baseline(const Dataset& data, const TrainHooks& hooks = {});
  /// pretrain + train_joint, or train_baseline, depending on the mode.
  void fit(const Dataset& data, const TrainHooks& hooks = {});

  /// Writes the checkpoint directory atomically (temp dir, then rename).
  void save(const std::filesystem::path& dir) const;
  /// Restores weights, optimizer state and counters. The checkpoint must have
  /// been produced with the same model spec and mode.
  void load(const std::filesystem::path& dir);

 private:
  BatchConfig batch_config() const;
  void run_epochs(const Dataset& data, int until, const std::string& phase, const TrainHooks& hooks);
  LossReport finish_step(LossReport report);

  ModelSpec spec_;
  TrainConfig config_;
  Models models_;
  ExtractorPtr extractor_;
  std::unique_ptr<torch::optim::Adam> opt_cycle_g_;
  std::unique_ptr<torch::optim::Adam> opt_cycle_d_;
  std::unique_ptr<torch::optim::Adam> opt_sr_g_;
  std::unique_ptr<torch::optim::Adam> opt_sr_d_;
  int epoch_ = 0;
  std::int64_t step_ = 0;
};

/// Eval-mode single forward of the SR network; output clamped to [0, 1].
Image infer(Network& g_l2h, const Image& lr);

struct EvalSummary {
  double psnr = 0.0;
  double ssim = 0.0;
  std::vector<EvalResult> per_image;
};

/// Upscales every pair's lr_real and scores it against hr.
EvalSummary evaluate(const std::vector<EvalPair>& pairs, const std::function<Image(const Image&)>& upscale,
                     const ShiftProtocol& protocol);
EvalSummary evaluate_bicubic(const std::vector<EvalPair>& pairs, int scale, const ShiftProtocol& protocol);
EvalSummary evaluate_network(const std::vector<EvalPair>& pairs, Network& g_l2h, const ShiftProtocol& protocol);

/// Trains a fresh model from the current trainer configuration into
/// `run_dir`: resolved config is the caller's business, this writes
/// ckpt_<epoch>/ after every epoch and appends one JSON line per step to
/// train_log.jsonl. With `resume` set the trainer is first restored from it
/// and the log is truncated to the restored step.
void run_training(Trainer& trainer, const Dataset& data, const std::filesystem::path& run_dir,
                  const std::filesystem::path& resume = {}, const TrainHooks& extra = {});

struct AblationRow {
  double lambda_mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::filesystem::path run_dir;
};

/// Trains one cyclesr model per lambda_mse (same seed) under out_dir/
/// lambda_<value>/, evaluates each on `val`, and saves G_s2r(lr_syn)
/// samples of the first `samples` validation images, raw and normalized to
/// lr_syn, after pretraining and after the final epoch.
std::vector<AblationRow> ablate_lambda_mse(const Dataset& data, const std::vector<EvalPair>& val,
                                           const ModelSpec& spec, const TrainConfig& config,
                                           const std::vector<double>& values, const std::filesystem::path& out_dir,
                                           const ShiftProtocol& protocol, int samples = 4);

/// Writes the ablation table as CSV with columns lambda_mse,psnr,ssim,run_dir.
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);

}  // namespace cyclesr
