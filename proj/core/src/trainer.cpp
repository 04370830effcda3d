#include "cyclesr/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include <fmt/format.h>
#include <json.hpp>

#include "cyclesr/checkpoint.hpp"

namespace cyclesr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kCycleSr: return "cyclesr";
    case TrainMode::kCycleSrGan: return "cyclesrgan";
    case TrainMode::kSrSyn: return "sr_syn";
    case TrainMode::kSrPaired: return "sr_paired";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view text) {
  if (text == "cyclesr") return TrainMode::kCycleSr;
  if (text == "cyclesrgan") return TrainMode::kCycleSrGan;
  if (text == "sr_syn") return TrainMode::kSrSyn;
  if (text == "sr_paired") return TrainMode::kSrPaired;
  throw std::invalid_argument(
      fmt::format("unknown mode '{}' (expected cyclesr, cyclesrgan, sr_syn or sr_paired)", text));
}

bool is_cycle_mode(TrainMode mode) { return mode == TrainMode::kCycleSr || mode == TrainMode::kCycleSrGan; }

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
  if (c.batch < 1) fail("batch must be >= 1");
  if (c.scale < 2 || (c.scale & (c.scale - 1)) != 0) fail(fmt::format("unsupported scale {}", c.scale));
  if (c.hr_patch < c.scale || c.hr_patch % c.scale != 0) {
    fail(fmt::format("hr_patch {} must be a positive multiple of scale {}", c.hr_patch, c.scale));
  }
  if (!(c.decay_start_epoch > 0 && c.decay_start_epoch < c.epochs_total)) {
    fail(fmt::format("need 0 < decay_start_epoch ({}) < epochs_total ({})", c.decay_start_epoch, c.epochs_total));
  }
  if (c.pretrain_epochs < 0 || c.pretrain_epochs > c.epochs_total) {
    fail("pretrain_epochs must lie in [0, epochs_total]");
  }
  if (!(c.lr_cyclegan > 0.0) || !(c.lr_sr > 0.0)) fail("learning rates must be > 0");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0) || !(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(c.grad_clip_norm > 0.0)) fail("grad_clip_norm must be > 0");
  if (c.patches_per_image < 1) fail("patches_per_image must be >= 1");
  validate(c.weights);
}

double lr_at(int epoch, double base, int decay_start, int total) {
  if (decay_start < 0 || decay_start >= total) {
    throw std::invalid_argument(fmt::format("lr_at: need 0 <= decay_start ({}) < total ({})", decay_start, total));
  }
  if (epoch < 0 || epoch > total) {
    throw std::invalid_argument(fmt::format("lr_at: epoch {} outside [0, {}]", epoch, total));
  }
  if (epoch < decay_start) return base;
  return base * static_cast<double>(total - epoch) / static_cast<double>(total - decay_start);
}

double clip_gradients(const std::vector<torch::Tensor>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be > 0");
  double sq = 0.0;
  for (const auto& p : params) {
    const torch::Tensor& g = p.grad();
    if (g.defined()) sq += g.detach().to(torch::kDouble).pow(2).sum().item<double>();
  }
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return 1.0;
  const double scale = max_norm / norm;
  torch::NoGradGuard no_grad;
  for (const auto& p : params) {
    torch::Tensor g = p.grad();
    if (g.defined()) g.mul_(scale);
  }
  return scale;
}

LossWeights effective_weights(const LossWeights& weights, TrainMode mode) {
  LossWeights w = weights;
  if (mode != TrainMode::kCycleSrGan) {
    w.lambda_advsr = 0.0;
    w.lambda_percep = 0.0;
  }
  return w;
}

ExtractorPtr make_extractor(const std::string& kind, std::uint64_t seed) {
  if (kind == "random") return std::make_shared<RandomConvExtractor>(seed);
  if (kind == "identity") return std::make_shared<IdentityExtractor>();
  if (fs::is_regular_file(kind)) return std::make_shared<ScriptedExtractor>(kind);
  throw std::invalid_argument(
      fmt::format("perceptual extractor '{}' is neither 'random', 'identity' nor an existing file", kind));
}

std::vector<std::pair<std::string, NetworkPtr>> Models::named() const {
  std::vector<std::pair<std::string, NetworkPtr>> out;
  for (const auto& [name, net] : {std::pair{"g_s2r", g_s2r}, std::pair{"g_r2s", g_r2s}, std::pair{"d_s", d_s},
                                  std::pair{"d_r", d_r}, std::pair{"g_l2h", g_l2h}, std::pair{"d_h", d_h}}) {
    if (net) out.emplace_back(name, net);
  }
  return out;
}

Models build_models(const ModelSpec& spec, TrainMode mode, std::uint64_t seed) {
  Models m;
  m.g_l2h = build_sr_network(spec, mix_seed(seed, 5));
  if (is_cycle_mode(mode)) {
    m.g_s2r = build_translator_generator(spec, mix_seed(seed, 1));
    m.g_r2s = build_translator_generator(spec, mix_seed(seed, 2));
    m.d_s = build_patch_discriminator(spec.discriminator, mix_seed(seed, 3));
    m.d_r = build_patch_discriminator(spec.discriminator, mix_seed(seed, 4));
  }
  if (mode == TrainMode::kCycleSrGan) m.d_h = build_patch_discriminator(spec.hr_discriminator, mix_seed(seed, 6));
  return m;
}

namespace {

std::string format_report(const LossReport& report) {
  std::string out;
  for (const auto& [k, v] : report) out += fmt::format("{}{}={}", out.empty() ? "" : ", ", k, v);
  return out;
}

std::vector<torch::Tensor> params_of(std::initializer_list<NetworkPtr> nets) {
  std::vector<torch::Tensor> out;
  for (const auto& n : nets) {
    if (!n) continue;
    for (const auto& p : n->parameters()) out.push_back(p);
  }
  return out;
}

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, double lr,
                                              const TrainConfig& c) {
  if (params.empty()) return nullptr;
  return std::make_unique<torch::optim::Adam>(
      params, torch::optim::AdamOptions(lr).betas({c.adam_beta1, c.adam_beta2}));
}

void set_lr(torch::optim::Adam* opt, double lr) {
  if (!opt) return;
  for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

double group_clip(torch::optim::Adam* opt, double max_norm) {
  if (!opt) return 1.0;
  std::vector<torch::Tensor> params;
  for (auto& group : opt->param_groups()) {
    for (auto& p : group.params()) params.push_back(p);
  }
  return clip_gradients(params, max_norm);
}

double scalar(const torch::Tensor& t) { return t.detach().item<double>(); }

json config_json(const TrainConfig& c) {
  return {{"batch", c.batch},
          {"hr_patch", c.hr_patch},
          {"scale", c.scale},
          {"epochs_total", c.epochs_total},
          {"decay_start_epoch", c.decay_start_epoch},
          {"pretrain_epochs", c.pretrain_epochs},
          {"lr_cyclegan", c.lr_cyclegan},
          {"lr_sr", c.lr_sr},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"grad_clip_norm", c.grad_clip_norm},
          {"lambda_cyc", c.weights.lambda_cyc},
          {"lambda_id", c.weights.lambda_id},
          {"lambda_mse", c.weights.lambda_mse},
          {"lambda_percep", c.weights.lambda_percep},
          {"lambda_advsr", c.weights.lambda_advsr},
          {"mode", to_string(c.mode)},
          {"seed", c.seed},
          {"patches_per_image", c.patches_per_image},
          {"augment", c.augment},
          {"perceptual", c.perceptual}};
}

}  // namespace

NonFiniteLoss::NonFiniteLoss(std::int64_t step, LossReport report)
    : std::runtime_error(fmt::format("non-finite loss at step {}: {}", step, format_report(report))),
      step_(step),
      report_(std::move(report)) {}

Trainer::Trainer(ModelSpec spec, TrainConfig config) : spec_(spec), config_(std::move(config)) {
  validate(spec_);
  validate(config_);
  if (spec_.sr.scale != config_.scale) {
    throw std::invalid_argument(
        fmt::format("model scale {} differs from training scale {}", spec_.sr.scale, config_.scale));
  }
  models_ = build_models(spec_, config_.mode, config_.seed);
  opt_cycle_g_ = make_adam(params_of({models_.g_s2r, models_.g_r2s}), config_.lr_cyclegan, config_);
  opt_cycle_d_ = make_adam(params_of({models_.d_s, models_.d_r}), config_.lr_cyclegan, config_);
  opt_sr_g_ = make_adam(params_of({models_.g_l2h}), config_.lr_sr, config_);
  opt_sr_d_ = make_adam(params_of({models_.d_h}), config_.lr_sr, config_);
  if (effective_weights(config_.weights, config_.mode).lambda_percep > 0.0) {
    extractor_ = make_extractor(config_.perceptual, mix_seed(config_.seed, 7));
  }
}

void Trainer::apply_schedule(int epoch) {
  const double cyc = lr_at(epoch, config_.lr_cyclegan, config_.decay_start_epoch, config_.epochs_total);
  const double sr = lr_at(epoch, config_.lr_sr, config_.decay_start_epoch, config_.epochs_total);
  set_lr(opt_cycle_g_.get(), cyc);
  set_lr(opt_cycle_d_.get(), cyc);
  set_lr(opt_sr_g_.get(), sr);
  set_lr(opt_sr_d_.get(), sr);
}

LossReport Trainer::finish_step(LossReport report) {
  ++step_;
  for (const auto& [k, v] : report) {
    if (!std::isfinite(v)) throw NonFiniteLoss(step_, std::move(report));
  }
  return report;
}

LossReport Trainer::pretrain_step(const TrainBatch& batch) {
  if (!is_cycle_mode(config_.mode)) throw std::logic_error("pretrain_step: mode has no translator");
  if (!batch.lr_real.defined()) throw std::invalid_argument("pretrain_step: batch has no real LR patches");
  for (const auto& [name, net] : models_.named()) net->train();
  CycleNets nets{models_.g_s2r, models_.g_r2s, models_.d_s, models_.d_r};

  Stage1Result s1 = stage1_loss(nets, batch.lr_syn, batch.lr_real, config_.weights);
  opt_cycle_g_->zero_grad();
  s1.g_objective.backward();
  group_clip(opt_cycle_g_.get(), config_.grad_clip_norm);
  opt_cycle_g_->step();
  opt_cycle_d_->zero_grad();
  s1.d_objective.backward();
  group_clip(opt_cycle_d_.get(), config_.grad_clip_norm);
  opt_cycle_d_->step();

  const torch::Tensor mse = mse_mean(models_.g_l2h->forward(batch.lr_syn), batch.hr);
  const torch::Tensor sr_obj = config_.weights.lambda_mse * mse;
  opt_sr_g_->zero_grad();
  sr_obj.backward();
  group_clip(opt_sr_g_.get(), config_.grad_clip_norm);
  opt_sr_g_->step();

  LossReport report = s1.report;
  report["stage1_g"] = scalar(s1.g_objective);
  report["stage1_d"] = scalar(s1.d_objective);
  report["mse"] = scalar(mse);
  report["sr_g"] = scalar(sr_obj);
  return finish_step(std::move(report));
}

LossReport Trainer::joint_step(const TrainBatch& batch) {
  if (!is_cycle_mode(config_.mode)) throw std::logic_error("joint_step: mode has no translator");
  if (!batch.lr_real.defined()) throw std::invalid_argument("joint_step: batch has no real LR patches");
  for (const auto& [name, net] : models_.named()) net->train();
  CycleNets nets{models_.g_s2r, models_.g_r2s, models_.d_s, models_.d_r};
  const LossWeights w2 = effective_weights(config_.weights, config_.mode);

  Stage1Result s1 = stage1_loss(nets, batch.lr_syn, batch.lr_real, config_.weights);
  const torch::Tensor sr = models_.g_l2h->forward(s1.fake_real);
  Stage2Result s2 = stage2_loss(sr, batch.hr, models_.d_h.get(), w2, extractor_.get());

  opt_cycle_g_->zero_grad();
  opt_sr_g_->zero_grad();
  (s1.g_objective + s2.g_objective).backward();
  group_clip(opt_cycle_g_.get(), config_.grad_clip_norm);
  group_clip(opt_sr_g_.get(), config_.grad_clip_norm);
  opt_cycle_g_->step();
  opt_sr_g_->step();

  opt_cycle_d_->zero_grad();
  torch::Tensor total_d = s1.d_objective;
  if (opt_sr_d_) {
    opt_sr_d_->zero_grad();
    if (s2.d_objective.defined()) total_d = total_d + s2.d_objective;
  }
  total_d.backward();
  group_clip(opt_cycle_d_.get(), config_.grad_clip_norm);
  opt_cycle_d_->step();
  if (opt_sr_d_ && s2.d_objective.defined()) {
    group_clip(opt_sr_d_.get(), config_.grad_clip_norm);
    opt_sr_d_->step();
  }

  LossReport report = s1.report;
  for (const auto& [k, v] : s2.report) report[k] = v;
  report["stage1_g"] = scalar(s1.g_objective);
  report["stage2_g"] = scalar(s2.g_objective);
  report["total_g"] = report["stage1_g"] + report["stage2_g"];
  report["stage1_d"] = scalar(s1.d_objective);
  if (s2.d_objective.defined()) report["stage2_d"] = scalar(s2.d_objective);
  report["total_d"] = scalar(total_d);
  return finish_step(std::move(report));
}

LossReport Trainer::baseline_step(const TrainBatch& batch) {
  models_.g_l2h->train();
  const torch::Tensor mse = mse_mean(models_.g_l2h->forward(batch.lr_syn), batch.hr);
  const torch::Tensor obj = config_.weights.lambda_mse * mse;
  opt_sr_g_->zero_grad();
  obj.backward();
  group_clip(opt_sr_g_.get(), config_.grad_clip_norm);
  opt_sr_g_->step();
  LossReport report{{"mse", scalar(mse)}, {"stage2_g", scalar(obj)}, {"total_g", scalar(obj)}};
  return finish_step(std::move(report));
}

BatchConfig Trainer::batch_config() const {
  BatchConfig b;
  b.batch_size = config_.batch;
  b.hr_patch = config_.hr_patch;
  b.patches_per_image = config_.patches_per_image;
  b.augment = config_.augment;
  b.pair_source = config_.mode == TrainMode::kSrPaired ? PairSource::kReal : PairSource::kSynthetic;
  return b;
}

void Trainer::run_epochs(const Dataset& data, int until, const std::string& phase, const TrainHooks& hooks) {
  if (data.scale() != config_.scale) {
    throw std::invalid_argument(
        fmt::format("corpus scale {} differs from training scale {}", data.scale(), config_.scale));
  }
  if (epoch_ >= until) return;
  BatchIterator batches(data, batch_config(), config_.seed);
  for (int e = epoch_; e < until; ++e) {
    apply_schedule(e);
    for (int i = 0; i < batches.batches_per_epoch(); ++i) {
      const TrainBatch batch = batches.batch(e, i);
      LossReport report = phase == "pretrain" ? pretrain_step(batch)
                          : phase == "joint"  ? joint_step(batch)
                                              : baseline_step(batch);
      if (hooks.on_step) hooks.on_step({step_, e, phase, std::move(report)});
    }
    epoch_ = e + 1;
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch_);
  }
}

void Trainer::pretrain(const Dataset& data, const TrainHooks& hooks) {
  if (!is_cycle_mode(config_.mode)) throw std::logic_error("pretrain: only cyclesr and cyclesrgan pretrain");
  if (data.lr_domain().empty()) throw std::invalid_argument("pretrain: corpus has no real LR images");
  run_epochs(data, config_.pretrain_epochs, "pretrain", hooks);
}

void Trainer::train_joint(const Dataset& data, const TrainHooks& hooks) {
  if (!is_cycle_mode(config_.mode)) throw std::logic_error("train_joint: only cyclesr and cyclesrgan train jointly");
  if (data.lr_domain().empty()) throw std::invalid_argument("train_joint: corpus has no real LR images");
  run_epochs(data, config_.epochs_total, "joint", hooks);
}

void Trainer::train_baseline(const Dataset& data, const TrainHooks& hooks) {
  if (is_cycle_mode(config_.mode)) throw std::logic_error("train_baseline: mode is not a baseline");
  if (config_.mode == TrainMode::kSrPaired && !data.has_paired_real()) {
    throw std::invalid_argument("sr_paired needs real LR renditions of the HR-domain images in the manifest");
  }
  run_epochs(data, config_.epochs_total, "baseline", hooks);
}

void Trainer::fit(const Dataset& data, const TrainHooks& hooks) {
  if (is_cycle_mode(config_.mode)) {
    pretrain(data, hooks);
    train_joint(data, hooks);
  } else {
    train_baseline(data, hooks);
  }
}

void Trainer::save(const fs::path& dir) const {
  fs::path tmp = dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  NamedModules modules;
  for (const auto& [name, net] : models_.named()) modules.emplace_back(name, net.get());
  write_weights(tmp, modules, {spec_, epoch_, step_, {}});
  const std::pair<const char*, const torch::optim::Adam*> opts[] = {{"optim_cycle_g.pt", opt_cycle_g_.get()},
                                                                     {"optim_cycle_d.pt", opt_cycle_d_.get()},
                                                                     {"optim_sr_g.pt", opt_sr_g_.get()},
                                                                     {"optim_sr_d.pt", opt_sr_d_.get()}};
  for (const auto& [file, opt] : opts) {
    if (opt) torch::save(*opt, (tmp / file).string());
  }
  const json state = {{"epoch", epoch_}, {"step", step_}, {"config", config_json(config_)}};
  {
    std::ofstream out(tmp / "state.json");
    out << state.dump(2) << '\n';
    if (!out) throw CheckpointError(fmt::format("cannot write '{}'", (tmp / "state.json").string()));
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

void Trainer::load(const fs::path& dir) {
  const WeightsMeta meta = read_weights_meta(dir);
  if (model_spec_to_json(meta.spec) != model_spec_to_json(spec_)) {
    throw CheckpointError(fmt::format("checkpoint '{}' was written for a different model spec", dir.string()));
  }
  json state;
  try {
    std::ifstream in(dir / "state.json");
    if (!in) throw CheckpointError(fmt::format("checkpoint '{}' has no state.json", dir.string()));
    state = json::parse(in);
    if (state.at("config").at("mode").get<std::string>() != to_string(config_.mode)) {
      throw CheckpointError(fmt::format("checkpoint '{}' was trained in mode {}", dir.string(),
                                        state.at("config").at("mode").get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("corrupt '{}': {}", (dir / "state.json").string(), e.what()));
  }
  NamedModules modules;
  for (const auto& [name, net] : models_.named()) modules.emplace_back(name, net.get());
  read_weights(dir, modules);
  const std::pair<const char*, torch::optim::Adam*> opts[] = {{"optim_cycle_g.pt", opt_cycle_g_.get()},
                                                               {"optim_cycle_d.pt", opt_cycle_d_.get()},
                                                               {"optim_sr_g.pt", opt_sr_g_.get()},
                                                               {"optim_sr_d.pt", opt_sr_d_.get()}};
  for (const auto& [file, opt] : opts) {
    if (!opt) continue;
    try {
      torch::load(*opt, (dir / file).string());
    } catch (const c10::Error& e) {
      throw CheckpointError(fmt::format("cannot restore optimizer '{}': {}", (dir / file).string(),
                                        e.what_without_backtrace()));
    }
  }
  epoch_ = meta.epoch;
  step_ = meta.step;
}

// ---------------------------------------------------------------------------

Image infer(Network& g_l2h, const Image& lr) {
  require_valid(lr, "infer input");
  torch::NoGradGuard no_grad;
  g_l2h.eval();
  return to_image(g_l2h.forward(to_tensor(lr)).clamp(0.0, 1.0));
}

EvalSummary evaluate(const std::vector<EvalPair>& pairs, const std::function<Image(const Image&)>& upscale,
                     const ShiftProtocol& protocol) {
  if (pairs.empty()) throw std::invalid_argument("evaluate: no image pairs");
  EvalSummary s;
  for (const auto& p : pairs) {
    s.per_image.push_back(shift_tolerant_score(upscale(p.lr_real), p.hr, protocol));
    s.psnr += s.per_image.back().psnr;
    s.ssim += s.per_image.back().ssim;
  }
  s.psnr /= static_cast<double>(pairs.size());
  s.ssim /= static_cast<double>(pairs.size());
  return s;
}

EvalSummary evaluate_bicubic(const std::vector<EvalPair>& pairs, int scale, const ShiftProtocol& protocol) {
  return evaluate(pairs, [scale](const Image& lr) { return bicubic_resample(lr, scale); }, protocol);
}

EvalSummary evaluate_network(const std::vector<EvalPair>& pairs, Network& g_l2h, const ShiftProtocol& protocol) {
  return evaluate(pairs, [&g_l2h](const Image& lr) { return infer(g_l2h, lr); }, protocol);
}

namespace {

std::string log_line(const StepRecord& r) {
  json j = {{"step", r.step}, {"epoch", r.epoch}, {"phase", r.phase}};
  for (const auto& [k, v] : r.losses) j[k] = v;
  return j.dump();
}

void truncate_log(const fs::path& log, std::int64_t keep_through) {
  if (!fs::exists(log)) return;
  std::vector<std::string> kept;
  {
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        if (json::parse(line).at("step").get<std::int64_t>() <= keep_through) kept.push_back(line);
      } catch (const json::exception&) {
        // A torn final line from an interrupted run is dropped.
      }
    }
  }
  std::ofstream out(log, std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
}

}  // namespace

void run_training(Trainer& trainer, const Dataset& data, const fs::path& run_dir, const fs::path& resume,
                  const TrainHooks& extra) {
  fs::create_directories(run_dir);
  const fs::path log_path = run_dir / "train_log.jsonl";
  if (!resume.empty()) {
    trainer.load(resume);
    truncate_log(log_path, trainer.step());
  } else {
    std::ofstream(log_path, std::ios::trunc);
  }
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw IoError(fmt::format("cannot open training log '{}'", log_path.string()));

  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord& r) {
    log << log_line(r) << '\n';
    log.flush();
    if (extra.on_step) extra.on_step(r);
  };
  hooks.on_epoch_end = [&](int epoch) {
    trainer.save(run_dir / fmt::format("ckpt_{}", epoch));
    if (extra.on_epoch_end) extra.on_epoch_end(epoch);
  };
  trainer.fit(data, hooks);
}

namespace {

void save_translation_samples(Network& g_s2r, const std::vector<EvalPair>& val, int count, const fs::path& dir) {
  fs::create_directories(dir);
  torch::NoGradGuard no_grad;
  g_s2r.eval();
  int written = 0;
  for (const auto& p : val) {
    if (written == count) break;
    if (!p.lr_syn) continue;
    const Image translated = to_image(g_s2r.forward(to_tensor(*p.lr_syn)));
    save_image(translated, dir / (p.id + "_raw.png"));
    try {
      save_image(normalize_to_reference(translated, *p.lr_syn), dir / (p.id + "_norm.png"));
    } catch (const std::invalid_argument& e) {
      std::cerr << fmt::format("warning: no normalized sample for '{}': {}\n", p.id, e.what());
    }
    ++written;
  }
  g_s2r.train();
}

}  // namespace

std::vector<AblationRow> ablate_lambda_mse(const Dataset& data, const std::vector<EvalPair>& val,
                                           const ModelSpec& spec, const TrainConfig& config,
                                           const std::vector<double>& values, const fs::path& out_dir,
                                           const ShiftProtocol& protocol, int samples) {
  if (values.size() < 2) throw std::invalid_argument("ablate_lambda_mse: needs at least two values");
  std::vector<AblationRow> rows;
  for (double v : values) {
    TrainConfig c = config;
    c.mode = TrainMode::kCycleSr;
    c.weights.lambda_mse = v;
    Trainer trainer(spec, c);
    const fs::path run_dir = out_dir / fmt::format("lambda_{:g}", v);
    TrainHooks hooks;
    hooks.on_epoch_end = [&](int epoch) {
      if (epoch == c.pretrain_epochs || epoch == c.epochs_total) {
        save_translation_samples(*trainer.models().g_s2r, val, samples,
                                 run_dir / "samples" / fmt::format("epoch_{}", epoch));
      }
    };
    run_training(trainer, data, run_dir, {}, hooks);
    const EvalSummary s = evaluate_network(val, *trainer.models().g_l2h, protocol);
    rows.push_back({v, s.psnr, s.ssim, run_dir});
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << "lambda_mse,psnr,ssim,run_dir\n";
  for (const auto& r : rows) out << fmt::format("{:g},{:.6f},{:.6f},{}\n", r.lambda_mse, r.psnr, r.ssim, r.run_dir.string());
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
}

}  // namespace cyclesr
