#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <torch/torch.h>

namespace cyclesr {

enum class SrVariant { kVdsrMod, kSrResNet };
std::string to_string(SrVariant v);
SrVariant parse_sr_variant(std::string_view text);

struct TranslatorSpec {
  int n_res_blocks = 6;
  int base_width = 64;
};

struct DiscriminatorSpec {
  int n_layers = 3;
  int base_width = 64;
};

struct SrSpec {
  SrVariant variant = SrVariant::kVdsrMod;
  int depth = 20;  // vdsr_mod: BN-ReLU-conv blocks; srresnet: residual blocks
  int width = 64;
  int scale = 4;
};

/// Architecture hyperparameters for every network in the framework.
/// `discriminator` configures the two LR-domain critics, `hr_discriminator`
/// the critic on super-resolved outputs.
struct ModelSpec {
  TranslatorSpec translator;
  DiscriminatorSpec discriminator;
  DiscriminatorSpec hr_discriminator;
  SrSpec sr;
};

void validate(const ModelSpec& spec);

/// Default SR depth for a variant: 20 blocks for vdsr_mod, 16 for srresnet.
int default_sr_depth(SrVariant v);

/// Common base for all image-to-image and image-to-score networks. Inputs are
/// [B, 3, H, W] batches with nominal range [0, 1].
class Network : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(torch::Tensor x) = 0;
};
using NetworkPtr = std::shared_ptr<Network>;

/// Sub-pixel rearrangement [B, C*r*r, H, W] -> [B, C, r*H, r*W] with
/// out(b, c, r*i + p, r*j + q) = in(b, c*r*r + p*r + q, i, j).
torch::Tensor pixel_shuffle(const torch::Tensor& x, int r);

/// ResNet-style translator: 7x7 stem, two stride-2 downsampling convs,
/// residual blocks, two stride-2 transposed convs and a 7x7 tanh head mapped
/// back to [0, 1]. Instance normalization throughout. Spatial sides must be
/// multiples of 4; the output has the input shape.
NetworkPtr build_translator_generator(const ModelSpec& spec, std::uint64_t seed);

class PatchDiscriminator : public Network {
 public:
  PatchDiscriminator(const DiscriminatorSpec& spec);
  torch::Tensor forward(torch::Tensor x) override;

  /// Side of the input window seen by one output score.
  int receptive_field() const;
  /// Score-map side for an input side, or <= 0 when the input is too small.
  int output_size(int input_size) const;

 private:
  struct Layer {
    int kernel;
    int stride;
  };
  std::vector<Layer> layers_;
  torch::nn::Sequential body_{nullptr};
};

/// PatchGAN critic emitting raw (unbounded) per-patch scores.
NetworkPtr build_patch_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);
inline NetworkPtr build_patch_discriminator(const ModelSpec& spec, std::uint64_t seed) {
  return build_patch_discriminator(spec.discriminator, seed);
}

/// VDSR without the leading bicubic upsample: stem conv, `depth` BN-ReLU-conv
/// blocks with a feature-space skip from the stem, a conv to 3*scale^2
/// channels and a single pixel shuffle.
class VdsrMod : public Network {
 public:
  explicit VdsrMod(const SrSpec& spec);
  torch::Tensor forward(torch::Tensor x) override;

  torch::nn::Conv2d stem{nullptr};
  torch::nn::Sequential blocks{nullptr};
  torch::nn::Conv2d head{nullptr};

 private:
  int scale_;
};

NetworkPtr build_sr_vdsr_mod(const ModelSpec& spec, std::uint64_t seed);
NetworkPtr build_srresnet(const ModelSpec& spec, std::uint64_t seed);
/// Dispatches on spec.sr.variant.
NetworkPtr build_sr_network(const ModelSpec& spec, std::uint64_t seed);

std::int64_t parameter_count(const torch::nn::Module& module);

}  // namespace cyclesr
