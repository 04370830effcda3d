#include "cyclesr/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

namespace cyclesr {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, text));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not true/false", key, text));
}

struct Entry {
  ConfigKey key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename Field>
Entry number(std::string name, std::string doc, std::function<Field&(RunConfig&)> ref) {
  return {{name, std::move(doc)},
          [ref](const RunConfig& c) { return fmt::format("{}", ref(const_cast<RunConfig&>(c))); },
          [ref, name](RunConfig& c, std::string_view v) { ref(c) = parse_number<Field>(name, v); }};
}

Entry text(std::string name, std::string doc, std::function<std::string&(RunConfig&)> ref) {
  return {{name, std::move(doc)},
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); },
          [ref](RunConfig& c, std::string_view v) { ref(c) = std::string(v); }};
}

template <typename Parse, typename Format>
Entry parsed(std::string name, std::string doc, Parse parse, Format format) {
  return {{name, std::move(doc)}, format, [parse, name](RunConfig& c, std::string_view v) {
            try {
              parse(c, v);
            } catch (const ConfigError&) {
              throw;
            } catch (const std::invalid_argument& e) {
              throw ConfigError(fmt::format("{}: {}", name, e.what()));
            }
          }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    // paths
    t.push_back(text("manifest", "training corpus manifest.json", [](RunConfig& c) -> std::string& { return c.manifest; }));
    t.push_back(text("val_manifest", "validation corpus manifest.json (optional)",
                     [](RunConfig& c) -> std::string& { return c.val_manifest; }));
    t.push_back(text("runs_dir", "parent directory of run directories",
                     [](RunConfig& c) -> std::string& { return c.runs_dir; }));
    t.push_back(text("name", "run name; outputs go to <runs_dir>/<name>", [](RunConfig& c) -> std::string& { return c.name; }));
    // schedule
    t.push_back(parsed(
        "mode", "cyclesr | cyclesrgan | sr_syn | sr_paired",
        [](RunConfig& c, std::string_view v) { c.train.mode = parse_train_mode(v); },
        [](const RunConfig& c) { return to_string(c.train.mode); }));
    t.push_back(number<std::uint64_t>("seed", "master random seed",
                                      [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }));
    t.push_back(parsed(
        "scale", "upscaling factor (power of two)",
        [](RunConfig& c, std::string_view v) {
          const int s = parse_number<int>("scale", v);
          c.train.scale = s;
          c.model.sr.scale = s;
          c.degradation.scale = s;
        },
        [](const RunConfig& c) { return fmt::format("{}", c.train.scale); }));
    t.push_back(number<int>("batch", "mini-batch size", [](RunConfig& c) -> int& { return c.train.batch; }));
    t.push_back(number<int>("hr_patch", "HR training patch side; the LR patch is hr_patch / scale",
                            [](RunConfig& c) -> int& { return c.train.hr_patch; }));
    t.push_back(number<int>("patches_per_image", "random patches drawn per HR image per epoch",
                            [](RunConfig& c) -> int& { return c.train.patches_per_image; }));
    t.push_back(parsed(
        "augment", "random flips and 90-degree rotations",
        [](RunConfig& c, std::string_view v) { c.train.augment = parse_bool("augment", v); },
        [](const RunConfig& c) { return std::string(c.train.augment ? "true" : "false"); }));
    t.push_back(number<int>("epochs_total", "total epochs including pretraining",
                            [](RunConfig& c) -> int& { return c.train.epochs_total; }));
    t.push_back(number<int>("decay_start_epoch", "epoch at which linear learning-rate decay begins",
                            [](RunConfig& c) -> int& { return c.train.decay_start_epoch; }));
    t.push_back(number<int>("pretrain_epochs", "epochs of separate CycleGAN / SR pretraining",
                            [](RunConfig& c) -> int& { return c.train.pretrain_epochs; }));
    t.push_back(number<double>("lr_cyclegan", "Adam learning rate of translators and LR critics",
                               [](RunConfig& c) -> double& { return c.train.lr_cyclegan; }));
    t.push_back(number<double>("lr_sr", "Adam learning rate of the SR network and HR critic",
                               [](RunConfig& c) -> double& { return c.train.lr_sr; }));
    t.push_back(number<double>("adam_beta1", "Adam beta1", [](RunConfig& c) -> double& { return c.train.adam_beta1; }));
    t.push_back(number<double>("adam_beta2", "Adam beta2", [](RunConfig& c) -> double& { return c.train.adam_beta2; }));
    t.push_back(number<double>("grad_clip_norm", "per-group gradient L2 norm limit",
                               [](RunConfig& c) -> double& { return c.train.grad_clip_norm; }));
    // losses
    t.push_back(number<double>("lambda_cyc", "cycle-consistency weight",
                               [](RunConfig& c) -> double& { return c.train.weights.lambda_cyc; }));
    t.push_back(number<double>("lambda_id", "identity weight",
                               [](RunConfig& c) -> double& { return c.train.weights.lambda_id; }));
    t.push_back(number<double>("lambda_mse", "SR pixel MSE weight",
                               [](RunConfig& c) -> double& { return c.train.weights.lambda_mse; }));
    t.push_back(number<double>("lambda_percep", "SR perceptual weight (cyclesrgan only)",
                               [](RunConfig& c) -> double& { return c.train.weights.lambda_percep; }));
    t.push_back(number<double>("lambda_advsr", "SR adversarial weight (cyclesrgan only)",
                               [](RunConfig& c) -> double& { return c.train.weights.lambda_advsr; }));
    t.push_back(text("perceptual", "feature network: random | identity | path to a TorchScript module",
                     [](RunConfig& c) -> std::string& { return c.train.perceptual; }));
    // model
    t.push_back(number<int>("translator_blocks", "residual blocks per translator",
                            [](RunConfig& c) -> int& { return c.model.translator.n_res_blocks; }));
    t.push_back(number<int>("translator_width", "translator base width",
                            [](RunConfig& c) -> int& { return c.model.translator.base_width; }));
    t.push_back(number<int>("disc_layers", "LR critic stride-2 layers",
                            [](RunConfig& c) -> int& { return c.model.discriminator.n_layers; }));
    t.push_back(number<int>("disc_width", "LR critic base width",
                            [](RunConfig& c) -> int& { return c.model.discriminator.base_width; }));
    t.push_back(number<int>("hr_disc_layers", "HR critic stride-2 layers",
                            [](RunConfig& c) -> int& { return c.model.hr_discriminator.n_layers; }));
    t.push_back(number<int>("hr_disc_width", "HR critic base width",
                            [](RunConfig& c) -> int& { return c.model.hr_discriminator.base_width; }));
    t.push_back(parsed(
        "sr_variant", "vdsr_mod | srresnet",
        [](RunConfig& c, std::string_view v) { c.model.sr.variant = parse_sr_variant(v); },
        [](const RunConfig& c) { return to_string(c.model.sr.variant); }));
    t.push_back(number<int>("sr_depth", "SR blocks (20 for vdsr_mod, 16 for srresnet)",
                            [](RunConfig& c) -> int& { return c.model.sr.depth; }));
    t.push_back(number<int>("sr_width", "SR feature width", [](RunConfig& c) -> int& { return c.model.sr.width; }));
    // degradation
    t.push_back(parsed(
        "blur", "dirac | gaussian:<sigma>[~<max>] | motion:<length>:<angle>",
        [](RunConfig& c, std::string_view v) { c.degradation.blur = parse_blur(v); },
        [](const RunConfig& c) { return to_string(c.degradation.blur); }));
    t.push_back(parsed(
        "noise", "none | gaussian:<sigma>[~<max>] | poisson:<peak>[~<max>]",
        [](RunConfig& c, std::string_view v) { c.degradation.noise = parse_noise(v); },
        [](const RunConfig& c) { return to_string(c.degradation.noise); }));
    t.push_back(parsed(
        "shift", "none | fixed:<dx>,<dy> | random:<max> (LR pixels)",
        [](RunConfig& c, std::string_view v) { c.degradation.shift = parse_shift(v); },
        [](const RunConfig& c) { return to_string(c.degradation.shift); }));
    t.push_back(parsed(
        "downsampler", "bicubic | bilinear | nearest",
        [](RunConfig& c, std::string_view v) { c.degradation.downsampler = parse_filter(v); },
        [](const RunConfig& c) { return to_string(c.degradation.downsampler); }));
    // evaluation
    t.push_back(number<int>("eval_max_shift", "shift search range in HR pixels",
                            [](RunConfig& c) -> int& { return c.eval.max_shift; }));
    t.push_back(number<int>("eval_border", "HR border pixels ignored by evaluation",
                            [](RunConfig& c) -> int& { return c.eval.border; }));
    t.push_back(parsed(
        "eval_center_crop", "centered crop side for scoring, or none",
        [](RunConfig& c, std::string_view v) {
          if (v == "none") {
            c.eval.center_crop.reset();
          } else {
            c.eval.center_crop = parse_number<int>("eval_center_crop", v);
          }
        },
        [](const RunConfig& c) {
          return c.eval.center_crop ? fmt::format("{}", *c.eval.center_crop) : std::string("none");
        }));
    return t;
  }();
  return table;
}

const Entry& find_entry(std::string_view key) {
  for (const auto& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  find_entry(key).set(config, trim(value));
}

std::string get_config_value(const RunConfig& config, std::string_view key) { return find_entry(key).get(config); }

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected 'key = value', got '{}'", line_no, line));
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_run_config(buffer.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const auto& e : entries()) {
    out += fmt::format("# {}\n{} = {}\n", e.key.doc, e.key.name, e.get(config));
  }
  return out;
}

void validate(const RunConfig& config) {
  validate(config.model);
  validate(config.train);
  validate(config.degradation);
  if (config.model.sr.scale != config.train.scale || config.degradation.scale != config.train.scale) {
    throw ConfigError("model, training and degradation scales differ");
  }
  if (config.eval.max_shift < 0 || config.eval.border < 0) throw ConfigError("eval shift and border must be >= 0");
  if (config.eval.center_crop && *config.eval.center_crop < 1) throw ConfigError("eval_center_crop must be >= 1");
  if (config.name.empty() || config.name.find('/') != std::string::npos) {
    throw ConfigError(fmt::format("run name '{}' must be a non-empty single path component", config.name));
  }
}

}  // namespace cyclesr
