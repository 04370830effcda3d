#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cyclesr/nets.hpp"

namespace cyclesr {

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_id = 0.5;
  double lambda_mse = 1e3;
  double lambda_percep = 1.0;
  double lambda_advsr = 0.05;
};

void validate(const LossWeights& w);

/// Named scalars for one optimization step. Only the terms that were
/// actually computed appear, so a pure-fidelity run has no adversarial SR or
/// perceptual entries.
using LossReport = std::map<std::string, double>;

// --- elementary terms -------------------------------------------------------

/// 0.5 * mean((real - 1)^2) + 0.5 * mean(fake^2)
torch::Tensor lsgan_d_loss(const torch::Tensor& scores_real, const torch::Tensor& scores_fake);
/// mean((fake - 1)^2)
torch::Tensor lsgan_g_loss(const torch::Tensor& scores_fake);
torch::Tensor l1_mean(const torch::Tensor& a, const torch::Tensor& b);
torch::Tensor mse_mean(const torch::Tensor& a, const torch::Tensor& b);

struct RaganLosses {
  torch::Tensor g_loss;
  torch::Tensor d_loss;
};
/// Relativistic average GAN losses, written with softplus so that saturated
/// scores cannot underflow through log(sigmoid(.)).
RaganLosses ragan_losses(const torch::Tensor& scores_real, const torch::Tensor& scores_fake);

// --- perceptual features ----------------------------------------------------

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  /// One tensor per configured layer.
  virtual std::vector<torch::Tensor> features(const torch::Tensor& x) = 0;
  virtual void to(torch::Dtype dtype) = 0;
};
using ExtractorPtr = std::shared_ptr<FeatureExtractor>;

/// Returns its input as the single feature layer.
class IdentityExtractor : public FeatureExtractor {
 public:
  std::vector<torch::Tensor> features(const torch::Tensor& x) override { return {x}; }
  void to(torch::Dtype) override {}
};

/// Frozen stack of 3x3 conv + ReLU layers with fixed-seed weights; offline and
/// deterministic. `taps` lists the 0-based layer indices whose activations
/// are returned.
class RandomConvExtractor : public FeatureExtractor {
 public:
  RandomConvExtractor(std::uint64_t seed, std::vector<int> widths = {16, 32, 32},
                      std::vector<int> taps = {1});
  std::vector<torch::Tensor> features(const torch::Tensor& x) override;
  void to(torch::Dtype dtype) override;

  const std::vector<torch::nn::Conv2d>& layers() const { return layers_; }
  const std::vector<int>& taps() const { return taps_; }

 private:
  std::vector<torch::nn::Conv2d> layers_;
  std::vector<int> taps_;
};

/// TorchScript feature network (for example an exported pretrained
/// classifier trunk). Its forward must return a tensor or a tuple/list of
/// tensors; inputs are normalized with the given per-channel mean/std first.
class ScriptedExtractor : public FeatureExtractor {
 public:
  explicit ScriptedExtractor(const std::filesystem::path& path,
                             std::vector<double> mean = {0.485, 0.456, 0.406},
                             std::vector<double> stddev = {0.229, 0.224, 0.225});
  ~ScriptedExtractor() override;
  std::vector<torch::Tensor> features(const torch::Tensor& x) override;
  void to(torch::Dtype dtype) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Sum over extractor layers of mse_mean(features(sr), features(hr)).
torch::Tensor perceptual_loss(const torch::Tensor& sr, const torch::Tensor& hr, FeatureExtractor* extractor);

// --- stage objectives -------------------------------------------------------

/// The four LR-domain networks of the translation stage.
struct CycleNets {
  NetworkPtr g_s2r;  // synthetic LR -> approximated real LR
  NetworkPtr g_r2s;  // real LR -> synthetic-looking LR
  NetworkPtr d_s;    // critic on the synthetic LR domain
  NetworkPtr d_r;    // critic on the real LR domain
};

struct Stage1Result {
  torch::Tensor g_objective;
  torch::Tensor d_objective;
  torch::Tensor fake_real;  // G_s2r(lr_syn), attached to the graph
  torch::Tensor fake_syn;   // G_r2s(lr_real)
  LossReport report;        // adv_*, cyc_*, id_*
};

/// Translation-stage objective on a synthetic and an (unpaired) real LR
/// batch. Generator objective: adv_g_s + adv_g_r + lambda_cyc (cyc_fwd +
/// cyc_bwd) + lambda_id (id_s + id_r). Discriminator objective adv_d_s +
/// adv_d_r is computed on detached translations.
Stage1Result stage1_loss(CycleNets& nets, const torch::Tensor& batch_syn, const torch::Tensor& batch_real,
                         const LossWeights& weights);

struct Stage2Result {
  torch::Tensor g_objective;
  torch::Tensor d_objective;  // undefined when there is no HR critic
  LossReport report;          // mse, and advsr_*/percep when they are active
};

/// SR-stage objective: lambda_mse mse + lambda_advsr advsr_g + lambda_percep
/// percep. The adversarial term needs `d_h`, the perceptual term needs
/// `extractor`; a term whose weight is zero is skipped entirely.
Stage2Result stage2_loss(const torch::Tensor& sr_out, const torch::Tensor& hr, Network* d_h,
                         const LossWeights& weights, FeatureExtractor* extractor);

}  // namespace cyclesr
