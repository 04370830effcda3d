#include "cyclesr/losses.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include <torch/script.h>

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace cyclesr {

namespace F = torch::nn::functional;

void validate(const LossWeights& w) {
  for (double v : {w.lambda_cyc, w.lambda_id, w.lambda_mse, w.lambda_percep, w.lambda_advsr}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and >= 0");
  }
}

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* who) {
  if (a.sizes() != b.sizes()) {
    throw std::invalid_argument(fmt::format("{}: shape mismatch [{}] vs [{}]", who,
                                            fmt::join(a.sizes(), ","), fmt::join(b.sizes(), ",")));
  }
}

double scalar(const torch::Tensor& t) { return t.detach().item<double>(); }

}  // namespace

torch::Tensor lsgan_d_loss(const torch::Tensor& scores_real, const torch::Tensor& scores_fake) {
  return 0.5 * (scores_real - 1.0).pow(2).mean() + 0.5 * scores_fake.pow(2).mean();
}

torch::Tensor lsgan_g_loss(const torch::Tensor& scores_fake) { return (scores_fake - 1.0).pow(2).mean(); }

torch::Tensor l1_mean(const torch::Tensor& a, const torch::Tensor& b) {
  require_same_shape(a, b, "l1_mean");
  return (a - b).abs().mean();
}

torch::Tensor mse_mean(const torch::Tensor& a, const torch::Tensor& b) {
  require_same_shape(a, b, "mse_mean");
  return (a - b).pow(2).mean();
}

RaganLosses ragan_losses(const torch::Tensor& scores_real, const torch::Tensor& scores_fake) {
  const torch::Tensor real_rel = scores_real - scores_fake.mean();
  const torch::Tensor fake_rel = scores_fake - scores_real.mean();
  // -log(sigmoid(x)) = softplus(-x), -log(1 - sigmoid(x)) = softplus(x)
  RaganLosses out;
  out.d_loss = F::softplus(-real_rel).mean() + F::softplus(fake_rel).mean();
  out.g_loss = F::softplus(-fake_rel).mean() + F::softplus(real_rel).mean();
  return out;
}

// ---------------------------------------------------------------------------

RandomConvExtractor::RandomConvExtractor(std::uint64_t seed, std::vector<int> widths, std::vector<int> taps)
    : taps_(std::move(taps)) {
  if (widths.empty()) throw std::invalid_argument("random conv extractor: needs at least one layer");
  for (int t : taps_) {
    if (t < 0 || t >= static_cast<int>(widths.size())) {
      throw std::invalid_argument(fmt::format("random conv extractor: tap {} out of range", t));
    }
  }
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  torch::NoGradGuard no_grad;
  int in = 3;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int stride = i == 0 ? 1 : 2;
    torch::nn::Conv2d conv(torch::nn::Conv2dOptions(in, widths[i], 3).stride(stride).padding(1));
    const double fan_in = in * 9.0;
    conv->weight.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
    conv->bias.uniform_(-0.1, 0.1, gen);
    for (auto& p : conv->parameters()) p.set_requires_grad(false);
    layers_.push_back(conv);
    in = widths[i];
  }
}

std::vector<torch::Tensor> RandomConvExtractor::features(const torch::Tensor& x) {
  std::vector<torch::Tensor> out;
  torch::Tensor h = x;
  const int last_tap = *std::max_element(taps_.begin(), taps_.end());
  for (int i = 0; i <= last_tap; ++i) {
    h = torch::relu(layers_[i]->forward(h));
    if (std::find(taps_.begin(), taps_.end(), i) != taps_.end()) out.push_back(h);
  }
  return out;
}

void RandomConvExtractor::to(torch::Dtype dtype) {
  for (auto& l : layers_) l->to(dtype);
}

struct ScriptedExtractor::Impl {
  torch::jit::script::Module module;
  torch::Tensor mean;
  torch::Tensor stddev;
};

ScriptedExtractor::ScriptedExtractor(const std::filesystem::path& path, std::vector<double> mean,
                                     std::vector<double> stddev)
    : impl_(std::make_unique<Impl>()) {
  try {
    impl_->module = torch::jit::load(path.string());
  } catch (const c10::Error& e) {
    throw std::runtime_error(fmt::format("cannot load feature network '{}': {}", path.string(), e.what_without_backtrace()));
  }
  impl_->module.eval();
  for (auto p : impl_->module.parameters()) p.set_requires_grad(false);
  impl_->mean = torch::tensor(mean, torch::kFloat).view({1, -1, 1, 1});
  impl_->stddev = torch::tensor(stddev, torch::kFloat).view({1, -1, 1, 1});
}

ScriptedExtractor::~ScriptedExtractor() = default;

std::vector<torch::Tensor> ScriptedExtractor::features(const torch::Tensor& x) {
  const torch::Tensor input = (x - impl_->mean.to(x.dtype())) / impl_->stddev.to(x.dtype());
  const c10::IValue result = impl_->module.forward({input});
  std::vector<torch::Tensor> out;
  if (result.isTensor()) {
    out.push_back(result.toTensor());
  } else if (result.isTuple()) {
    for (const auto& v : result.toTupleRef().elements()) out.push_back(v.toTensor());
  } else if (result.isTensorList()) {
    for (const auto& t : result.toTensorVector()) out.push_back(t);
  } else if (result.isList()) {
    for (const auto& v : result.toListRef()) out.push_back(v.toTensor());
  } else {
    throw std::runtime_error("feature network must return a tensor or a sequence of tensors");
  }
  return out;
}

void ScriptedExtractor::to(torch::Dtype dtype) { impl_->module.to(dtype); }

torch::Tensor perceptual_loss(const torch::Tensor& sr, const torch::Tensor& hr, FeatureExtractor* extractor) {
  if (extractor == nullptr) throw std::invalid_argument("perceptual_loss: no feature extractor configured");
  require_same_shape(sr, hr, "perceptual_loss");
  const auto fs = extractor->features(sr);
  const auto fh = extractor->features(hr);
  if (fs.empty() || fs.size() != fh.size()) throw std::runtime_error("perceptual_loss: extractor returned no layers");
  torch::Tensor total = mse_mean(fs[0], fh[0]);
  for (std::size_t i = 1; i < fs.size(); ++i) total = total + mse_mean(fs[i], fh[i]);
  return total;
}

// ---------------------------------------------------------------------------

Stage1Result stage1_loss(CycleNets& nets, const torch::Tensor& batch_syn, const torch::Tensor& batch_real,
                         const LossWeights& weights) {
  validate(weights);
  if (batch_syn.dim() != 4 || batch_real.dim() != 4 || batch_syn.sizes().slice(1) != batch_real.sizes().slice(1)) {
    throw std::invalid_argument("stage1_loss: synthetic and real batches must share channel and spatial size");
  }
  Stage1Result r;
  r.fake_real = nets.g_s2r->forward(batch_syn);
  r.fake_syn = nets.g_r2s->forward(batch_real);
  const torch::Tensor rec_syn = nets.g_r2s->forward(r.fake_real);
  const torch::Tensor rec_real = nets.g_s2r->forward(r.fake_syn);
  const torch::Tensor id_syn = nets.g_r2s->forward(batch_syn);
  const torch::Tensor id_real = nets.g_s2r->forward(batch_real);

  const torch::Tensor adv_g_r = lsgan_g_loss(nets.d_r->forward(r.fake_real));
  const torch::Tensor adv_g_s = lsgan_g_loss(nets.d_s->forward(r.fake_syn));
  const torch::Tensor cyc_fwd = l1_mean(rec_syn, batch_syn);
  const torch::Tensor cyc_bwd = l1_mean(rec_real, batch_real);
  const torch::Tensor id_s = l1_mean(id_syn, batch_syn);
  const torch::Tensor id_r = l1_mean(id_real, batch_real);
  r.g_objective = adv_g_s + adv_g_r + weights.lambda_cyc * (cyc_fwd + cyc_bwd) +
                  weights.lambda_id * (id_s + id_r);

  const torch::Tensor adv_d_r = lsgan_d_loss(nets.d_r->forward(batch_real), nets.d_r->forward(r.fake_real.detach()));
  const torch::Tensor adv_d_s = lsgan_d_loss(nets.d_s->forward(batch_syn), nets.d_s->forward(r.fake_syn.detach()));
  r.d_objective = adv_d_s + adv_d_r;

  r.report = {{"adv_g_s", scalar(adv_g_s)}, {"adv_g_r", scalar(adv_g_r)},
              {"adv_d_s", scalar(adv_d_s)}, {"adv_d_r", scalar(adv_d_r)},
              {"cyc_fwd", scalar(cyc_fwd)}, {"cyc_bwd", scalar(cyc_bwd)},
              {"id_s", scalar(id_s)},       {"id_r", scalar(id_r)}};
  return r;
}

Stage2Result stage2_loss(const torch::Tensor& sr_out, const torch::Tensor& hr, Network* d_h,
                         const LossWeights& weights, FeatureExtractor* extractor) {
  validate(weights);
  Stage2Result r;
  const torch::Tensor mse = mse_mean(sr_out, hr);
  r.g_objective = weights.lambda_mse * mse;
  r.report["mse"] = scalar(mse);

  if (weights.lambda_percep > 0.0) {
    const torch::Tensor percep = perceptual_loss(sr_out, hr, extractor);
    r.g_objective = r.g_objective + weights.lambda_percep * percep;
    r.report["percep"] = scalar(percep);
  }
  if (weights.lambda_advsr > 0.0) {
    if (d_h == nullptr) throw std::invalid_argument("stage2_loss: adversarial SR term needs an HR critic");
    const torch::Tensor real_scores = d_h->forward(hr);
    const RaganLosses g = ragan_losses(real_scores.detach(), d_h->forward(sr_out));
    const RaganLosses d = ragan_losses(real_scores, d_h->forward(sr_out.detach()));
    r.g_objective = r.g_objective + weights.lambda_advsr * g.g_loss;
    r.d_objective = d.d_loss;
    r.report["advsr_g"] = scalar(g.g_loss);
    r.report["advsr_d"] = scalar(d.d_loss);
  }
  return r;
}

}  // namespace cyclesr
