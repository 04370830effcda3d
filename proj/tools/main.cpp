// cyclesr: corpus synthesis, training, inference, evaluation and ablation.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cyclesr/checkpoint.hpp"
#include "cyclesr/data.hpp"
#include "cyclesr/degrade.hpp"
#include "cyclesr/imagecore.hpp"
#include "cyclesr/run_config.hpp"
#include "cyclesr/trainer.hpp"

namespace fs = std::filesystem;
using namespace cyclesr;

namespace {

/// Bad flags or configuration; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError(fmt::format("'{}' is not a directory", dir.string()));
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// --- shared run-config flags ----------------------------------------------------

struct ConfigFlags {
  std::string config;
  std::string manifest;
  std::string val_manifest;
  std::string mode;
  std::string name;
  std::string runs_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::vector<std::string> overrides;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "key = value configuration file");
    cmd->add_option("--manifest", manifest, "training corpus manifest.json");
    cmd->add_option("--val-manifest", val_manifest, "validation corpus manifest.json");
    cmd->add_option("--mode", mode, "cyclesr | cyclesrgan | sr_syn | sr_paired");
    cmd->add_option("--name", name, "run name");
    cmd->add_option("--runs-dir", runs_dir, "parent directory of runs");
    cmd->add_option("--seed", seed, "master random seed");
    cmd->add_option("--epochs", epochs, "total epochs (epochs_total)");
    cmd->add_option("--set", overrides, "override any config key: --set key=value (repeatable)");
  }

  RunConfig resolve(RunConfig cfg) const {
    if (!config.empty()) cfg = load_run_config(config, cfg);
    auto set = [&cfg](const char* key, const std::string& v) {
      if (!v.empty()) set_config_value(cfg, key, v);
    };
    set("manifest", manifest);
    set("val_manifest", val_manifest);
    set("mode", mode);
    set("name", name);
    set("runs_dir", runs_dir);
    if (seed) cfg.train.seed = *seed;
    if (epochs) cfg.train.epochs_total = *epochs;
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(fmt::format("--set expects key=value, got '{}'", kv));
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    validate(cfg);
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
}

// --- synth -----------------------------------------------------------------------

struct SynthArgs {
  std::string hr_dir;
  std::string out;
  std::uint64_t seed = 0;
  std::string config;
  std::vector<std::string> overrides;
};

int cmd_synth(const SynthArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = load_run_config(a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("--set expects key=value, got '{}'", kv));
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate(cfg.degradation);
  const CorpusManifest m = synthesize_corpus(a.hr_dir, cfg.degradation, a.out, a.seed);
  std::cout << fmt::format("wrote {} entries ({} HR domain, {} LR domain) to {}\n", m.entries.size(),
                           m.with_role(DomainRole::kHr).size(), m.with_role(DomainRole::kLr).size(),
                           (fs::path(a.out) / "manifest.json").string());
  return 0;
}

// --- procgen ---------------------------------------------------------------------

struct ProcgenArgs {
  std::string out;
  int count = 10;
  int height = 96;
  int width = 96;
  std::uint64_t seed = 0;
};

int cmd_procgen(const ProcgenArgs& a) {
  if (a.count < 1) throw UsageError("--count must be >= 1");
  fs::create_directories(a.out);
  for (int i = 0; i < a.count; ++i) {
    save_image(procedural_image(a.height, a.width, mix_seed(a.seed, static_cast<std::uint64_t>(i))),
               fs::path(a.out) / fmt::format("img_{:04d}.png", i));
  }
  std::cout << fmt::format("wrote {} images to {}\n", a.count, a.out);
  return 0;
}

// --- train -----------------------------------------------------------------------

struct TrainArgs {
  ConfigFlags flags;
  std::string resume;
};

int cmd_train(const TrainArgs& a) {
  RunConfig base;
  fs::path run_dir;
  if (!a.resume.empty()) {
    const fs::path resolved = fs::path(a.resume).parent_path() / "config.txt";
    if (a.flags.config.empty() && fs::exists(resolved)) base = load_run_config(resolved);
  }
  const RunConfig cfg = a.flags.resolve(base);
  if (cfg.manifest.empty()) throw UsageError("no training manifest: pass --manifest or set 'manifest'");
  run_dir = a.resume.empty() ? fs::path(cfg.runs_dir) / cfg.name : fs::path(a.resume).parent_path();

  const Dataset data = load_manifest(cfg.manifest);
  std::optional<std::vector<EvalPair>> val;
  if (!cfg.val_manifest.empty()) val = load_eval_pairs(cfg.val_manifest);
  Trainer trainer(cfg.model, cfg.train);

  fs::create_directories(run_dir);
  write_text(run_dir / "config.txt", format_run_config(cfg));

  std::map<std::string, double> sums;
  int count = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord& r) {
    for (const auto& [k, v] : r.losses) sums[k] += v;
    ++count;
  };
  hooks.on_epoch_end = [&](int epoch) {
    std::string line = fmt::format("epoch {}/{} step {}", epoch, cfg.train.epochs_total, trainer.step());
    for (const char* key : {"total_g", "sr_g", "mse", "cyc_fwd"}) {
      if (sums.count(key)) line += fmt::format(" {}={:.5g}", key, sums[key] / count);
    }
    std::cout << line << std::endl;
    sums.clear();
    count = 0;
  };
  run_training(trainer, data, run_dir, a.resume, hooks);

  if (val) {
    const EvalSummary sr = evaluate_network(*val, *trainer.models().g_l2h, cfg.eval);
    const EvalSummary bic = evaluate_bicubic(*val, cfg.train.scale, cfg.eval);
    write_text(run_dir / "eval.json",
               fmt::format("{{\"psnr\": {}, \"ssim\": {}, \"bicubic_psnr\": {}, \"bicubic_ssim\": {}, \"images\": {}}}\n",
                           sr.psnr, sr.ssim, bic.psnr, bic.ssim, val->size()));
    std::cout << fmt::format("validation: {:.3f} dB / {:.4f} (bicubic {:.3f} dB / {:.4f})\n", sr.psnr, sr.ssim,
                             bic.psnr, bic.ssim);
  }
  return 0;
}

// --- infer -----------------------------------------------------------------------

struct InferArgs {
  std::string ckpt;
  std::string in;
  std::string out;
};

int cmd_infer(const InferArgs& a) {
  const NetworkPtr net = load_sr_network(a.ckpt);
  std::vector<fs::path> inputs;
  if (fs::is_regular_file(a.in)) {
    inputs.push_back(a.in);
  } else {
    inputs = list_pngs(a.in);
  }
  if (inputs.empty()) throw UsageError(fmt::format("no PNG inputs in '{}'", a.in));

  // Everything is computed before the first file is written, and a failed
  // write removes what was already written.
  std::vector<std::pair<fs::path, Image>> results;
  for (const auto& p : inputs) results.emplace_back(fs::path(a.out) / p.filename(), infer(*net, load_image(p)));

  const bool created = !fs::exists(a.out);
  fs::create_directories(a.out);
  std::vector<fs::path> written;
  try {
    for (const auto& [path, img] : results) {
      fs::path tmp = path;
      tmp += ".partial";
      save_image(img, tmp);
      fs::rename(tmp, path);
      written.push_back(path);
    }
  } catch (...) {
    for (const auto& p : written) fs::remove(p);
    for (const auto& [path, img] : results) {
      fs::path tmp = path;
      tmp += ".partial";
      fs::remove(tmp);
    }
    if (created) fs::remove(a.out);
    throw;
  }
  std::cout << fmt::format("wrote {} images to {}\n", written.size(), a.out);
  return 0;
}

// --- eval ------------------------------------------------------------------------

struct EvalArgs {
  std::string sr_dir;
  std::string hr_dir;
  int max_shift = 40;
  int border = 4;
  std::optional<int> center_crop;
  std::string out;
  std::string plot;
};

void write_score_plot(const std::vector<std::pair<std::string, EvalResult>>& rows, const fs::path& path) {
  constexpr int kWidth = 640, kHeight = 360, kMargin = 50;
  double lo = rows.front().second.psnr, hi = lo;
  for (const auto& [id, r] : rows) {
    lo = std::min(lo, r.psnr);
    hi = std::max(hi, r.psnr);
  }
  lo = std::floor(lo) - 1.0;
  hi = std::ceil(hi) + 1.0;
  const double bar = static_cast<double>(kWidth - 2 * kMargin) / static_cast<double>(rows.size());
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      kWidth, kHeight);
  const double plot_h = kHeight - 2 * kMargin;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double h = plot_h * (rows[i].second.psnr - lo) / (hi - lo);
    svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#4a7ab5\">"
                       "<title>{} {:.3f} dB</title></rect>\n",
                       kMargin + i * bar + 1, kMargin + plot_h - h, std::max(bar - 2, 1.0), h, rows[i].first,
                       rows[i].second.psnr);
  }
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kMargin,
                     kHeight - kMargin, kWidth - kMargin);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kMargin, kMargin,
                     kHeight - kMargin);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.0f}</text>\n", kMargin - 4, kHeight - kMargin,
                     lo);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.0f}</text>\n", kMargin - 4, kMargin + 4, hi);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">PSNR (dB) per image</text>\n</svg>\n",
                     kWidth / 2, kMargin / 2);
  write_text(path, svg);
}

int cmd_eval(const EvalArgs& a) {
  const ShiftProtocol protocol{a.max_shift, a.border, a.center_crop};
  const auto sr_files = list_pngs(a.sr_dir);
  if (sr_files.empty()) throw UsageError(fmt::format("no PNG files in '{}'", a.sr_dir));
  std::vector<std::pair<std::string, EvalResult>> rows;
  for (const auto& sr_path : sr_files) {
    const fs::path hr_path = fs::path(a.hr_dir) / sr_path.filename();
    if (!fs::exists(hr_path)) throw LoadError(fmt::format("no ground truth '{}' for '{}'", hr_path.string(), sr_path.string()));
    rows.emplace_back(sr_path.stem().string(), shift_tolerant_score(load_image(sr_path), load_image(hr_path), protocol));
  }
  double psnr = 0.0, ssim = 0.0;
  std::string csv = "image_id,psnr_db,ssim,dx,dy\n";
  for (const auto& [id, r] : rows) {
    csv += fmt::format("{},{},{},{},{}\n", id, r.psnr, r.ssim, r.best_shift.dx, r.best_shift.dy);
    psnr += r.psnr;
    ssim += r.ssim;
  }
  csv += fmt::format("mean,{},{},,\n", psnr / rows.size(), ssim / rows.size());
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out, csv);
    std::cout << fmt::format("mean over {} images: {:.4f} dB / {:.4f}\n", rows.size(), psnr / rows.size(),
                             ssim / rows.size());
  }
  if (!a.plot.empty()) write_score_plot(rows, a.plot);
  return 0;
}

// --- ablate ----------------------------------------------------------------------

struct AblateArgs {
  ConfigFlags flags;
  std::vector<double> lambdas;
  std::string out;
  int samples = 4;
};

int cmd_ablate(const AblateArgs& a) {
  const RunConfig cfg = a.flags.resolve({});
  if (cfg.manifest.empty()) throw UsageError("no training manifest: pass --manifest or set 'manifest'");
  if (cfg.val_manifest.empty()) throw UsageError("ablation needs --val-manifest");
  if (a.lambdas.size() < 2) throw UsageError("--lambda-mse needs at least two values");
  const fs::path out = a.out.empty() ? fs::path(cfg.runs_dir) / cfg.name : fs::path(a.out);
  const Dataset data = load_manifest(cfg.manifest);
  const auto val = load_eval_pairs(cfg.val_manifest);
  fs::create_directories(out);
  write_text(out / "config.txt", format_run_config(cfg));
  const auto rows = ablate_lambda_mse(data, val, cfg.model, cfg.train, a.lambdas, out, cfg.eval, a.samples);
  write_ablation_csv(rows, out / "ablation.csv");
  for (const auto& r : rows) std::cout << fmt::format("lambda_mse {:g}: {:.3f} dB / {:.4f}\n", r.lambda_mse, r.psnr, r.ssim);
  return 0;
}

// --- config ----------------------------------------------------------------------

int cmd_config(const ConfigFlags& flags) {
  std::cout << format_run_config(flags.resolve({}));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised super-resolution through cycle-consistent LR translation"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "degrade a directory of HR PNGs into an unpaired corpus");
  s->add_option("--hr-dir", synth.hr_dir, "directory of HR PNG images")->required();
  s->add_option("--out", synth.out, "output corpus directory")->required();
  s->add_option("--seed", synth.seed, "degradation seed")->required();
  s->add_option("--config", synth.config, "config file supplying degradation keys");
  s->add_option("--set", synth.overrides, "override a config key (scale, blur, noise, shift, downsampler)");

  ProcgenArgs procgen;
  auto* p = app.add_subcommand("procgen", "write procedural test images");
  p->add_option("--out", procgen.out, "output directory")->required();
  p->add_option("--count", procgen.count, "number of images");
  p->add_option("--height", procgen.height, "image height");
  p->add_option("--width", procgen.width, "image width");
  p->add_option("--seed", procgen.seed, "generator seed");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a model; writes runs/<name>/{config.txt,ckpt_<epoch>,train_log.jsonl}");
  train.flags.add_to(t);
  t->add_option("--resume", train.resume, "checkpoint directory to continue from");

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "super-resolve PNGs with a checkpoint's SR network");
  i->add_option("--ckpt", inf.ckpt, "checkpoint directory")->required();
  i->add_option("--in", inf.in, "input PNG or directory of PNGs")->required();
  i->add_option("--out", inf.out, "output directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "shift-tolerant PSNR/SSIM of SR outputs against ground truth");
  e->add_option("--sr-dir", ev.sr_dir, "directory of SR outputs")->required();
  e->add_option("--hr-dir", ev.hr_dir, "directory of ground truth with matching file names")->required();
  e->add_option("--max-shift", ev.max_shift, "largest shift searched, in pixels")->check(CLI::NonNegativeNumber);
  e->add_option("--border", ev.border, "border pixels ignored")->check(CLI::NonNegativeNumber);
  e->add_option("--center-crop", ev.center_crop, "score only a centered square of this side")->check(CLI::PositiveNumber);
  e->add_option("--out", ev.out, "CSV output file (stdout when omitted)");
  e->add_option("--plot", ev.plot, "write an SVG bar chart of per-image PSNR");

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "train one cyclesr model per lambda_mse value and compare");
  ab.flags.add_to(a);
  a->add_option("--lambda-mse", ab.lambdas, "comma-separated lambda_mse values")->required()->delimiter(',');
  a->add_option("--out", ab.out, "output directory (default <runs_dir>/<name>)");
  a->add_option("--samples", ab.samples, "translated validation samples saved per checkpoint");

  ConfigFlags cfg_flags;
  auto* c = app.add_subcommand("config", "print the resolved configuration with documentation");
  cfg_flags.add_to(c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForVersion& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: " << err.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (s->parsed()) return cmd_synth(synth);
    if (p->parsed()) return cmd_procgen(procgen);
    if (t->parsed()) return cmd_train(train);
    if (i->parsed()) return cmd_infer(inf);
    if (e->parsed()) return cmd_eval(ev);
    if (a->parsed()) return cmd_ablate(ab);
    if (c->parsed()) return cmd_config(cfg_flags);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const NonFiniteLoss& err) {
    std::cerr << "error: training aborted: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
