#include "testing.hpp"

#include <cmath>
#include <functional>

#include <torch/torch.h>

#include "cyclesr/losses.hpp"
#include "cyclesr/nets.hpp"

using namespace cyclesr;

namespace {

using ScalarFn = std::function<torch::Tensor(const std::vector<torch::Tensor>&)>;

// Worst relative error between autograd and central differences over every
// element of every input.
double gradient_error(const ScalarFn& fn, std::vector<torch::Tensor> inputs) {
  for (auto& t : inputs) t = t.detach().clone().to(torch::kDouble).requires_grad_(true);
  fn(inputs).backward();
  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const torch::Tensor analytic = inputs[k].grad().flatten();
    for (std::int64_t i = 0; i < inputs[k].numel(); ++i) {
      torch::NoGradGuard guard;
      std::vector<torch::Tensor> plus, minus;
      for (const auto& t : inputs) {
        plus.push_back(t.detach().clone());
        minus.push_back(t.detach().clone());
      }
      plus[k].view(-1)[i] += eps;
      minus[k].view(-1)[i] -= eps;
      const double fd = (fn(plus).item<double>() - fn(minus).item<double>()) / (2 * eps);
      const double an = analytic[i].item<double>();
      worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
    }
  }
  return worst;
}

double loop_mse(const torch::Tensor& a, const torch::Tensor& b) {
  auto fa = a.flatten(), fb = b.flatten();
  double acc = 0;
  for (std::int64_t i = 0; i < fa.numel(); ++i) {
    const double d = fa[i].item<double>() - fb[i].item<double>();
    acc += d * d;
  }
  return acc / fa.numel();
}

double softplus(double x) { return std::log1p(std::exp(x)); }

CycleNets tiny_cycle_nets() {
  ModelSpec spec;
  spec.translator = {1, 8};
  spec.discriminator = {2, 8};
  return {build_translator_generator(spec, 1), build_translator_generator(spec, 2),
          build_patch_discriminator(spec, 3), build_patch_discriminator(spec, 4)};
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("lsgan") {
  const torch::Tensor ones = torch::ones({4, 1, 3, 3}, torch::kDouble);
  const torch::Tensor zeros = torch::zeros({4, 1, 3, 3}, torch::kDouble);
  CHECK(lsgan_d_loss(ones, zeros).item<double>() == 0.0);
  CHECK(lsgan_d_loss(zeros, ones).item<double>() == doctest::Approx(1.0));
  CHECK(lsgan_g_loss(ones).item<double>() == 0.0);
  CHECK(lsgan_g_loss(zeros).item<double>() == doctest::Approx(1.0));

  torch::manual_seed(3);
  const torch::Tensor r = torch::randn({3, 5}, torch::kDouble), f = torch::randn({3, 5}, torch::kDouble);
  double dr = 0, df = 0, g = 0;
  for (int i = 0; i < 15; ++i) {
    const double vr = r.flatten()[i].item<double>(), vf = f.flatten()[i].item<double>();
    dr += (vr - 1) * (vr - 1);
    df += vf * vf;
    g += (vf - 1) * (vf - 1);
  }
  CHECK(std::abs(lsgan_d_loss(r, f).item<double>() - (0.5 * dr / 15 + 0.5 * df / 15)) < 1e-7);
  CHECK(std::abs(lsgan_g_loss(f).item<double>() - g / 15) < 1e-7);

  const torch::Tensor perm = torch::randperm(3);
  CHECK(std::abs(lsgan_d_loss(r.index_select(0, perm), f).item<double>() - lsgan_d_loss(r, f).item<double>()) < 1e-12);
}

TEST_CASE("l1 and mse") {
  const torch::Tensor a = torch::rand({2, 3, 4, 4}, torch::kDouble);
  CHECK(l1_mean(a, a).item<double>() == 0.0);
  CHECK(mse_mean(a, a).item<double>() == 0.0);
  torch::Tensor b = a.clone();
  b.view(-1)[7] += 0.5;
  CHECK(l1_mean(a, b).item<double>() == doctest::Approx(0.5 / a.numel()));
  CHECK(mse_mean(a, a + 0.1).item<double>() == doctest::Approx(0.01));

  const torch::Tensor c = torch::rand({2, 3, 4, 4}, torch::kDouble);
  CHECK(std::abs(mse_mean(a, c).item<double>() - loop_mse(a, c)) < 1e-12);
  CHECK(std::abs(l1_mean(a, c).item<double>() - (a - c).abs().sum().item<double>() / a.numel()) < 1e-12);
  CHECK_THROWS_AS(l1_mean(a, c.slice(3, 0, 3)), std::invalid_argument);
  CHECK_THROWS_AS(mse_mean(a, c.slice(3, 0, 3)), std::invalid_argument);
}

TEST_CASE("ragan") {
  for (double v : {-3.0, 0.0, 2.5}) {
    const torch::Tensor s = torch::full({4, 1, 2, 2}, v, torch::kDouble);
    const RaganLosses l = ragan_losses(s, s);
    CHECK(std::abs(l.g_loss.item<double>() - 2 * std::log(2.0)) < 1e-9);
    CHECK(std::abs(l.d_loss.item<double>() - 2 * std::log(2.0)) < 1e-9);
  }
  const RaganLosses l = ragan_losses(torch::zeros({3}, torch::kDouble), torch::ones({3}, torch::kDouble));
  CHECK(std::abs(l.d_loss.item<double>() - 2 * softplus(1.0)) < 1e-12);
  CHECK(std::abs(l.d_loss.item<double>() - 2.6265) < 1e-4);

  const RaganLosses sat = ragan_losses(torch::full({2}, 500.0, torch::kDouble), torch::full({2}, -500.0, torch::kDouble));
  CHECK(sat.d_loss.item<double>() < 1e-12);
  CHECK(std::isfinite(sat.g_loss.item<double>()));

  torch::manual_seed(4);
  const torch::Tensor r = torch::randn({6}, torch::kDouble), f = torch::randn({6}, torch::kDouble);
  const RaganLosses a = ragan_losses(r, f), b = ragan_losses(f, r);
  CHECK(std::abs(a.g_loss.item<double>() - b.d_loss.item<double>()) < 1e-12);
  CHECK(std::abs(a.d_loss.item<double>() - b.g_loss.item<double>()) < 1e-12);
  const torch::Tensor perm = torch::randperm(6);
  CHECK(std::abs(ragan_losses(r.index_select(0, perm), f).d_loss.item<double>() - a.d_loss.item<double>()) < 1e-12);

  // Direct log-sigmoid form.
  const double mr = r.mean().item<double>(), mf = f.mean().item<double>();
  double d = 0;
  for (int i = 0; i < 6; ++i) {
    const double sr = 1 / (1 + std::exp(-(r[i].item<double>() - mf)));
    const double sf = 1 / (1 + std::exp(-(f[i].item<double>() - mr)));
    d += -std::log(sr) / 6 - std::log(1 - sf) / 6;
  }
  CHECK(std::abs(a.d_loss.item<double>() - d) < 1e-12);
}

TEST_CASE("perceptual") {
  torch::manual_seed(5);
  const torch::Tensor sr = torch::rand({2, 3, 8, 8}), hr = torch::rand({2, 3, 8, 8});
  RandomConvExtractor ex(11, {8, 8, 8}, {0, 2});
  CHECK(perceptual_loss(hr, hr, &ex).item<double>() == 0.0);
  IdentityExtractor id;
  CHECK(perceptual_loss(sr, hr, &id).item<double>() == doctest::Approx(mse_mean(sr, hr).item<double>()));
  CHECK_THROWS_AS(perceptual_loss(sr, hr, nullptr), std::invalid_argument);

  // Independent forward pass through the same frozen layers.
  auto run = [&](torch::Tensor x) {
    std::vector<torch::Tensor> taps;
    for (int i = 0; i < 3; ++i) {
      const auto& conv = ex.layers()[i];
      x = torch::relu(torch::conv2d(x, conv->weight, conv->bias, i == 0 ? 1 : 2, 1));
      if (i == 0 || i == 2) taps.push_back(x);
    }
    return taps;
  };
  const auto fs = run(sr), fh = run(hr);
  const double want = ((fs[0] - fh[0]).pow(2).mean() + (fs[1] - fh[1]).pow(2).mean()).item<double>();
  CHECK(perceptual_loss(sr, hr, &ex).item<double>() == doctest::Approx(want).epsilon(1e-6));

  RandomConvExtractor again(11, {8, 8, 8}, {0, 2});
  CHECK(perceptual_loss(sr, hr, &again).item<double>() == perceptual_loss(sr, hr, &ex).item<double>());
}

TEST_CASE("finite-difference gradients of every term") {
  torch::manual_seed(6);
  const auto a = torch::rand({1, 3, 4, 4}, torch::kDouble);  // 48 elements
  const auto b = torch::rand({1, 3, 4, 4}, torch::kDouble);
  const auto s1 = torch::randn({2, 1, 3, 3}, torch::kDouble);
  const auto s2 = torch::randn({2, 1, 3, 3}, torch::kDouble);
  RandomConvExtractor ex(3, {4, 4}, {0, 1});
  ex.to(torch::kDouble);
  const double tol = 1e-4;
  CHECK(gradient_error([](const auto& v) { return lsgan_g_loss(v[0]); }, {s1}) < tol);
  CHECK(gradient_error([](const auto& v) { return lsgan_d_loss(v[0], v[1]); }, {s1, s2}) < tol);
  // Keep |a - b| away from the kink of the absolute value.
  CHECK(gradient_error([](const auto& v) { return l1_mean(v[0], v[1]); }, {a, b + 0.01 * torch::sign(b - a)}) < tol);
  CHECK(gradient_error([](const auto& v) { return mse_mean(v[0], v[1]); }, {a, b}) < tol);
  CHECK(gradient_error([&](const auto& v) { return perceptual_loss(v[0], v[1], &ex); }, {a, b}) < tol);
  CHECK(gradient_error([](const auto& v) { return ragan_losses(v[0], v[1]).g_loss; }, {s1, s2}) < tol);
  CHECK(gradient_error([](const auto& v) { return ragan_losses(v[0], v[1]).d_loss; }, {s1, s2}) < tol);
}

TEST_CASE("stage 1 objective") {
  CycleNets nets = tiny_cycle_nets();
  torch::manual_seed(7);
  const torch::Tensor syn = torch::rand({2, 3, 32, 32}), real = torch::rand({2, 3, 32, 32});
  LossWeights w;
  const Stage1Result r = stage1_loss(nets, syn, real, w);
  const LossReport& t = r.report;
  for (const char* k : {"adv_g_s", "adv_g_r", "adv_d_s", "adv_d_r", "cyc_fwd", "cyc_bwd", "id_s", "id_r"}) {
    REQUIRE(t.count(k) == 1);
    CHECK(std::isfinite(t.at(k)));
  }
  const double g = t.at("adv_g_s") + t.at("adv_g_r") + w.lambda_cyc * (t.at("cyc_fwd") + t.at("cyc_bwd")) +
                   w.lambda_id * (t.at("id_s") + t.at("id_r"));
  CHECK(std::abs(r.g_objective.item<double>() - g) < 1e-5 * std::max(1.0, g));
  CHECK(r.d_objective.item<double>() == doctest::Approx(t.at("adv_d_s") + t.at("adv_d_r")).epsilon(1e-6));

  // Independent recomputation of two terms.
  const auto fwd = nets.g_r2s->forward(nets.g_s2r->forward(syn));
  CHECK(t.at("cyc_fwd") == doctest::Approx((fwd - syn).abs().mean().item<double>()).epsilon(1e-6));
  CHECK(t.at("id_r") == doctest::Approx((nets.g_s2r->forward(real) - real).abs().mean().item<double>()).epsilon(1e-6));

  LossWeights zero = w;
  zero.lambda_cyc = zero.lambda_id = 0;
  const Stage1Result z = stage1_loss(nets, syn, real, zero);
  CHECK(z.g_objective.item<double>() == doctest::Approx(t.at("adv_g_s") + t.at("adv_g_r")).epsilon(1e-6));

  LossWeights doubled = w;
  doubled.lambda_cyc *= 2;
  const Stage1Result d = stage1_loss(nets, syn, real, doubled);
  CHECK(d.g_objective.item<double>() - r.g_objective.item<double>() ==
        doctest::Approx(w.lambda_cyc * (t.at("cyc_fwd") + t.at("cyc_bwd"))).epsilon(1e-4));

  CHECK_THROWS_AS(stage1_loss(nets, syn, torch::rand({2, 3, 16, 16}), w), std::invalid_argument);
}

TEST_CASE("stage 2 objective") {
  torch::manual_seed(8);
  const torch::Tensor sr = torch::rand({2, 3, 80, 80}), hr = torch::rand({2, 3, 80, 80});
  DiscriminatorSpec dspec{2, 8};
  const NetworkPtr d_h = build_patch_discriminator(dspec, 9);
  RandomConvExtractor ex(2);

  LossWeights fidelity;
  fidelity.lambda_mse = 1;
  fidelity.lambda_advsr = fidelity.lambda_percep = 0;
  const Stage2Result zero = stage2_loss(hr, hr, nullptr, fidelity, nullptr);
  CHECK(zero.g_objective.item<double>() == 0.0);
  CHECK_FALSE(zero.d_objective.defined());
  CHECK(zero.report.size() == 1);

  LossWeights w;  // 1e3, 0.05, 1
  const Stage2Result r = stage2_loss(sr, hr, d_h.get(), w, &ex);
  const double mse = mse_mean(sr, hr).item<double>();
  const double percep = perceptual_loss(sr, hr, &ex).item<double>();
  const torch::Tensor real_scores = d_h->forward(hr), fake_scores = d_h->forward(sr);
  const RaganLosses rg = ragan_losses(real_scores, fake_scores);
  const double want = 1e3 * mse + 0.05 * rg.g_loss.item<double>() + percep;
  CHECK(r.g_objective.item<double>() == doctest::Approx(want).epsilon(1e-6));
  CHECK(r.d_objective.item<double>() == doctest::Approx(rg.d_loss.item<double>()).epsilon(1e-6));
  CHECK(r.report.at("percep") >= 0.0);

  LossWeights scaled = w;
  scaled.lambda_mse *= 3;
  scaled.lambda_advsr *= 3;
  scaled.lambda_percep *= 3;
  CHECK(stage2_loss(sr, hr, d_h.get(), scaled, &ex).g_objective.item<double>() ==
        doctest::Approx(3 * r.g_objective.item<double>()).epsilon(1e-6));
  CHECK_THROWS_AS(stage2_loss(sr, hr, nullptr, w, &ex), std::invalid_argument);
}

TEST_CASE("weights must be non-negative") {
  LossWeights w;
  w.lambda_id = -1;
  CHECK_THROWS_AS(validate(w), std::invalid_argument);
}

}  // TEST_SUITE
