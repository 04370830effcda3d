#include "cyclesr/nets.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace cyclesr {

namespace nn = torch::nn;

std::string to_string(SrVariant v) { return v == SrVariant::kVdsrMod ? "vdsr_mod" : "srresnet"; }

SrVariant parse_sr_variant(std::string_view text) {
  if (text == "vdsr_mod") return SrVariant::kVdsrMod;
  if (text == "srresnet") return SrVariant::kSrResNet;
  throw std::invalid_argument(fmt::format("unknown SR variant '{}'", text));
}

int default_sr_depth(SrVariant v) { return v == SrVariant::kVdsrMod ? 20 : 16; }

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

nn::Conv2d conv(int in, int out, int kernel, int stride = 1, int padding = 0, bool bias = true) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(bias));
}

nn::InstanceNorm2d instance_norm(int channels) {
  return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels));
}

// CycleGAN-style initialization: N(0, 0.02) for conv weights, N(1, 0.02) for
// affine norm scales, zero biases.
void init_gan_weights(nn::Module& module, at::Generator& gen) {
  torch::NoGradGuard no_grad;
  for (auto& item : module.named_parameters()) {
    const std::string& name = item.key();
    torch::Tensor& p = item.value();
    const bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
    if (is_bias) {
      p.zero_();
    } else if (p.dim() == 1) {
      p.normal_(1.0, 0.02, gen);
    } else {
      p.normal_(0.0, 0.02, gen);
    }
  }
}

// He-normal initialization for the SR networks; norm scales one, biases zero,
// PReLU slopes keep their 0.25 default.
void init_sr_weights(nn::Module& module, at::Generator& gen) {
  torch::NoGradGuard no_grad;
  for (auto& item : module.named_parameters()) {
    const std::string& name = item.key();
    torch::Tensor& p = item.value();
    if (name.find("prelu") != std::string::npos) continue;
    const bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
    if (is_bias) {
      p.zero_();
    } else if (p.dim() == 1) {
      p.fill_(1.0);
    } else {
      const double fan_in = static_cast<double>(p.size(1) * p.size(2) * p.size(3));
      p.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
    }
    // The output layer starts small around mid-gray.
    if (name.rfind("head.", 0) == 0) {
      if (is_bias) {
        p.fill_(0.5);
      } else {
        p.mul_(0.1);
      }
    }
  }
}

at::Generator make_generator(std::uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

void require_image_batch(const torch::Tensor& x, const char* who) {
  if (x.dim() != 4 || x.size(1) != 3) {
    throw std::invalid_argument(fmt::format("{}: expected [B, 3, H, W] input, got {}", who,
                                            fmt::join(x.sizes(), "x")));
  }
}

// ---------------------------------------------------------------------------

class ResnetBlock : public nn::Module {
 public:
  explicit ResnetBlock(int width) {
    body = register_module("body", nn::Sequential(
        nn::ReflectionPad2d(1), conv(width, width, 3, 1, 0, false), instance_norm(width),
        nn::ReLU(),
        nn::ReflectionPad2d(1), conv(width, width, 3, 1, 0, false), instance_norm(width)));
  }
  torch::Tensor forward(const torch::Tensor& x) { return x + body->forward(x); }

  nn::Sequential body{nullptr};
};

class TranslatorGenerator : public Network {
 public:
  explicit TranslatorGenerator(const TranslatorSpec& spec) {
    const int w = spec.base_width;
    nn::Sequential seq(
        nn::ReflectionPad2d(3), conv(3, w, 7, 1, 0, false), instance_norm(w), nn::ReLU(),
        conv(w, 2 * w, 3, 2, 1, false), instance_norm(2 * w), nn::ReLU(),
        conv(2 * w, 4 * w, 3, 2, 1, false), instance_norm(4 * w), nn::ReLU());
    for (int i = 0; i < spec.n_res_blocks; ++i) seq->push_back(std::make_shared<ResnetBlock>(4 * w));
    seq->push_back(nn::ConvTranspose2d(
        nn::ConvTranspose2dOptions(4 * w, 2 * w, 3).stride(2).padding(1).output_padding(1).bias(false)));
    seq->push_back(instance_norm(2 * w));
    seq->push_back(nn::ReLU());
    seq->push_back(nn::ConvTranspose2d(
        nn::ConvTranspose2dOptions(2 * w, w, 3).stride(2).padding(1).output_padding(1).bias(false)));
    seq->push_back(instance_norm(w));
    seq->push_back(nn::ReLU());
    seq->push_back(nn::ReflectionPad2d(3));
    seq->push_back(conv(w, 3, 7));
    seq->push_back(nn::Tanh());
    body = register_module("body", seq);
  }

  torch::Tensor forward(torch::Tensor x) override {
    require_image_batch(x, "translator");
    if (x.size(2) % 4 != 0 || x.size(3) % 4 != 0 || x.size(2) < 8 || x.size(3) < 8) {
      throw std::invalid_argument(fmt::format(
          "translator: spatial size {}x{} must be a multiple of 4 and at least 8", x.size(2), x.size(3)));
    }
    // [0,1] in, [0,1] out; the tanh head works on [-1,1].
    return (body->forward(x * 2.0 - 1.0) + 1.0) * 0.5;
  }

  nn::Sequential body{nullptr};
};

class SrResNetBlock : public nn::Module {
 public:
  explicit SrResNetBlock(int width) {
    conv1 = register_module("conv1", conv(width, width, 3, 1, 1, false));
    bn1 = register_module("bn1", nn::BatchNorm2d(width));
    prelu = register_module("prelu", nn::PReLU());
    conv2 = register_module("conv2", conv(width, width, 3, 1, 1, false));
    bn2 = register_module("bn2", nn::BatchNorm2d(width));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    return x + bn2(conv2(prelu(bn1(conv1(x)))));
  }

  nn::Conv2d conv1{nullptr}, conv2{nullptr};
  nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  nn::PReLU prelu{nullptr};
};

class SrResNet : public Network {
 public:
  explicit SrResNet(const SrSpec& spec) {
    const int w = spec.width;
    stem = register_module("stem", conv(3, w, 9, 1, 4));
    stem_prelu = register_module("stem_prelu", nn::PReLU());
    blocks = register_module("blocks", nn::Sequential());
    for (int i = 0; i < spec.depth; ++i) blocks->push_back(std::make_shared<SrResNetBlock>(w));
    post = register_module("post", nn::Sequential(conv(w, w, 3, 1, 1, false), nn::BatchNorm2d(w)));
    int stages = 0;
    for (int s = spec.scale; s > 1; s /= 2) ++stages;
    upsample = register_module("upsample", nn::ModuleList());
    upsample_prelu = register_module("upsample_prelu", nn::ModuleList());
    for (int i = 0; i < stages; ++i) {
      upsample->push_back(conv(w, 4 * w, 3, 1, 1));
      upsample_prelu->push_back(nn::PReLU());
    }
    head = register_module("head", conv(w, 3, 9, 1, 4));
  }

  torch::Tensor forward(torch::Tensor x) override {
    require_image_batch(x, "srresnet");
    const torch::Tensor features = stem_prelu(stem(x));
    torch::Tensor y = features + post->forward(blocks->forward(features));
    for (std::size_t i = 0; i < upsample->size(); ++i) {
      y = upsample[i]->as<nn::Conv2d>()->forward(y);
      y = upsample_prelu[i]->as<nn::PReLU>()->forward(pixel_shuffle(y, 2));
    }
    return head(y);
  }

  nn::Conv2d stem{nullptr}, head{nullptr};
  nn::PReLU stem_prelu{nullptr};
  nn::Sequential blocks{nullptr}, post{nullptr};
  nn::ModuleList upsample{nullptr}, upsample_prelu{nullptr};
};

}  // namespace

void validate(const ModelSpec& spec) {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw std::invalid_argument(fmt::format("model spec: {} must be >= 1, got {}", what, v));
  };
  if (spec.translator.n_res_blocks < 0) throw std::invalid_argument("model spec: translator blocks must be >= 0");
  positive(spec.translator.base_width, "translator width");
  positive(spec.discriminator.n_layers, "discriminator layers");
  positive(spec.discriminator.base_width, "discriminator width");
  positive(spec.hr_discriminator.n_layers, "hr discriminator layers");
  positive(spec.hr_discriminator.base_width, "hr discriminator width");
  positive(spec.sr.depth, "sr depth");
  positive(spec.sr.width, "sr width");
  if (!is_power_of_two(spec.sr.scale) || spec.sr.scale < 2) {
    throw std::invalid_argument(fmt::format("model spec: unsupported SR scale {}", spec.sr.scale));
  }
}

torch::Tensor pixel_shuffle(const torch::Tensor& x, int r) {
  if (x.dim() != 4) throw std::invalid_argument("pixel_shuffle: expected a 4-D tensor");
  if (r < 1) throw std::invalid_argument("pixel_shuffle: factor must be >= 1");
  const std::int64_t b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  if (c % (r * r) != 0) {
    throw std::invalid_argument(fmt::format("pixel_shuffle: {} channels not divisible by {}", c, r * r));
  }
  if (r == 1) return x;
  const std::int64_t oc = c / (r * r);
  return x.reshape({b, oc, r, r, h, w}).permute({0, 1, 4, 2, 5, 3}).reshape({b, oc, h * r, w * r});
}

NetworkPtr build_translator_generator(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  auto net = std::make_shared<TranslatorGenerator>(spec.translator);
  auto gen = make_generator(seed);
  init_gan_weights(*net, gen);
  return net;
}

// ---------------------------------------------------------------------------

PatchDiscriminator::PatchDiscriminator(const DiscriminatorSpec& spec) {
  const int w = spec.base_width;
  nn::Sequential seq(conv(3, w, 4, 2, 1), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  layers_.push_back({4, 2});
  int prev = w;
  for (int n = 1; n < spec.n_layers; ++n) {
    const int next = w * std::min(1 << n, 8);
    seq->push_back(conv(prev, next, 4, 2, 1, false));
    seq->push_back(instance_norm(next));
    seq->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    layers_.push_back({4, 2});
    prev = next;
  }
  const int last = w * std::min(1 << spec.n_layers, 8);
  seq->push_back(conv(prev, last, 4, 1, 1, false));
  seq->push_back(instance_norm(last));
  seq->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  layers_.push_back({4, 1});
  seq->push_back(conv(last, 1, 4, 1, 1));
  layers_.push_back({4, 1});
  body_ = register_module("body", seq);
}

int PatchDiscriminator::receptive_field() const {
  int rf = 1;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) rf = (rf - 1) * it->stride + it->kernel;
  return rf;
}

int PatchDiscriminator::output_size(int input_size) const {
  int size = input_size;
  for (const Layer& l : layers_) {
    const int padded = size + 2 - l.kernel;
    if (padded < 0) return 0;
    size = padded / l.stride + 1;
  }
  return size;
}

torch::Tensor PatchDiscriminator::forward(torch::Tensor x) {
  require_image_batch(x, "patch discriminator");
  // Instance norm needs more than one spatial element, so every normalized
  // map must be at least 2x2 and the final score map non-empty.
  int h = static_cast<int>(x.size(2));
  int w = static_cast<int>(x.size(3));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const bool normalized = i > 0 && i + 1 < layers_.size();
    const int min_side = normalized ? 2 : 1;
    h = h + 2 - l.kernel < 0 ? 0 : (h + 2 - l.kernel) / l.stride + 1;
    w = w + 2 - l.kernel < 0 ? 0 : (w + 2 - l.kernel) / l.stride + 1;
    if (h < min_side || w < min_side) {
      throw std::invalid_argument(fmt::format(
          "patch discriminator: {}x{} input too small for this critic (receptive field {})",
          x.size(2), x.size(3), receptive_field()));
    }
  }
  return body_->forward(x * 2.0 - 1.0);
}

NetworkPtr build_patch_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) {
  if (spec.n_layers < 1 || spec.base_width < 1) {
    throw std::invalid_argument("patch discriminator: layers and width must be >= 1");
  }
  auto net = std::make_shared<PatchDiscriminator>(spec);
  auto gen = make_generator(seed);
  init_gan_weights(*net, gen);
  return net;
}

// ---------------------------------------------------------------------------

VdsrMod::VdsrMod(const SrSpec& spec) : scale_(spec.scale) {
  const int w = spec.width;
  stem = register_module("stem", conv(3, w, 3, 1, 1));
  nn::Sequential seq;
  for (int i = 0; i < spec.depth; ++i) {
    seq->push_back(nn::BatchNorm2d(w));
    seq->push_back(nn::ReLU());
    seq->push_back(conv(w, w, 3, 1, 1, false));
  }
  blocks = register_module("blocks", seq);
  head = register_module("head", conv(w, 3 * spec.scale * spec.scale, 3, 1, 1));
}

torch::Tensor VdsrMod::forward(torch::Tensor x) {
  require_image_batch(x, "vdsr_mod");
  const torch::Tensor features = stem(x);
  return pixel_shuffle(head(features + blocks->forward(features)), scale_);
}

NetworkPtr build_sr_vdsr_mod(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  if (spec.sr.variant != SrVariant::kVdsrMod) throw std::invalid_argument("build_sr_vdsr_mod: variant is not vdsr_mod");
  auto net = std::make_shared<VdsrMod>(spec.sr);
  auto gen = make_generator(seed);
  init_sr_weights(*net, gen);
  return net;
}

NetworkPtr build_srresnet(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  if (spec.sr.variant != SrVariant::kSrResNet) throw std::invalid_argument("build_srresnet: variant is not srresnet");
  auto net = std::make_shared<SrResNet>(spec.sr);
  auto gen = make_generator(seed);
  init_sr_weights(*net, gen);
  return net;
}

NetworkPtr build_sr_network(const ModelSpec& spec, std::uint64_t seed) {
  return spec.sr.variant == SrVariant::kVdsrMod ? build_sr_vdsr_mod(spec, seed) : build_srresnet(spec, seed);
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t total = 0;
  for (const auto& p : module.parameters()) total += p.numel();
  return total;
}

}  // namespace cyclesr
