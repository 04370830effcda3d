#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "cyclesr/degrade.hpp"

namespace cyclesr {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(DomainRole role) { return role == DomainRole::kHr ? "hr" : "lr"; }

DomainRole parse_role(std::string_view text) {
  if (text == "hr") return DomainRole::kHr;
  if (text == "lr") return DomainRole::kLr;
  throw std::invalid_argument(fmt::format("unknown domain role '{}'", text));
}

std::vector<const ManifestEntry*> CorpusManifest::with_role(DomainRole role) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.role == role) out.push_back(&e);
  }
  return out;
}

namespace {

json blur_to_json(const BlurSpec& blur) {
  if (std::holds_alternative<DiracBlur>(blur)) return {{"type", "dirac"}};
  if (const auto* g = std::get_if<GaussianBlur>(&blur)) {
    return {{"type", "gaussian"}, {"sigma", g->sigma}, {"sigma_max", std::max(g->sigma, g->sigma_max)}};
  }
  if (const auto* m = std::get_if<MotionBlur>(&blur)) {
    return {{"type", "motion"}, {"length", m->length}, {"angle", m->angle}};
  }
  const auto& k = std::get<Kernel>(blur);
  return {{"type", "explicit"}, {"rows", k.rows}, {"cols", k.cols}, {"weights", k.weights}};
}

// Manifests store the effective range [lo, max(lo, hi)]; a degenerate range
// reads back as a single value.
double upper_bound(const json& j, const char* lo_key, const char* hi_key) {
  const double lo = j.at(lo_key);
  const double hi = j.value(hi_key, 0.0);
  return hi > lo ? hi : 0.0;
}

BlurSpec blur_from_json(const json& j) {
  const std::string type = j.at("type");
  if (type == "dirac") return DiracBlur{};
  if (type == "gaussian") return GaussianBlur{j.at("sigma"), upper_bound(j, "sigma", "sigma_max")};
  if (type == "motion") return MotionBlur{j.at("length"), j.at("angle")};
  if (type == "explicit") {
    Kernel k{j.at("rows"), j.at("cols"), j.at("weights").get<std::vector<double>>()};
    validate_kernel(k);
    return k;
  }
  throw std::invalid_argument(fmt::format("manifest: unknown blur type '{}'", type));
}

json noise_to_json(const NoiseSpec& noise) {
  if (std::holds_alternative<NoNoise>(noise)) return {{"type", "none"}};
  if (const auto* g = std::get_if<GaussianNoise>(&noise)) {
    return {{"type", "gaussian"}, {"sigma", g->sigma}, {"sigma_max", std::max(g->sigma, g->sigma_max)}};
  }
  const auto& p = std::get<PoissonNoise>(noise);
  return {{"type", "poisson"}, {"peak", p.peak}, {"peak_max", std::max(p.peak, p.peak_max)}};
}

NoiseSpec noise_from_json(const json& j) {
  const std::string type = j.at("type");
  if (type == "none") return NoNoise{};
  if (type == "gaussian") return GaussianNoise{j.at("sigma"), upper_bound(j, "sigma", "sigma_max")};
  if (type == "poisson") return PoissonNoise{j.at("peak"), upper_bound(j, "peak", "peak_max")};
  throw std::invalid_argument(fmt::format("manifest: unknown noise type '{}'", type));
}

json shift_to_json(const ShiftSpec& shift) {
  if (const auto* f = std::get_if<FixedShift>(&shift)) {
    return {{"type", "fixed"}, {"dx", f->shift.dx}, {"dy", f->shift.dy}};
  }
  return {{"type", "random"}, {"shift_max", std::get<RandomShift>(shift).max_shift}};
}

ShiftSpec shift_from_json(const json& j) {
  const std::string type = j.at("type");
  if (type == "fixed") return FixedShift{{j.at("dx"), j.at("dy")}};
  if (type == "random") return RandomShift{j.at("shift_max")};
  throw std::invalid_argument(fmt::format("manifest: unknown shift type '{}'", type));
}

json optional_path(const std::optional<std::string>& p) { return p ? json(*p) : json(nullptr); }

std::optional<std::string> path_from_json(const json& entry, const char* key) {
  if (!entry.contains(key) || entry.at(key).is_null()) return std::nullopt;
  return entry.at(key).get<std::string>();
}

}  // namespace

void write_manifest(const CorpusManifest& manifest, const fs::path& path) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"id", e.id},
                       {"role", to_string(e.role)},
                       {"hr", optional_path(e.hr)},
                       {"lr_real", optional_path(e.lr_real)},
                       {"lr_syn", optional_path(e.lr_syn)}});
  }
  const DegradationSpec& d = manifest.degradation;
  json doc = {{"seed", manifest.seed},
              {"degradation",
               {{"scale", d.scale},
                {"blur", blur_to_json(d.blur)},
                {"noise", noise_to_json(d.noise)},
                {"shift", shift_to_json(d.shift)},
                {"downsampler", to_string(d.downsampler)}}},
              {"entries", entries}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write manifest '{}'", path.string()));
  out << doc.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("failed writing manifest '{}'", path.string()));
}

CorpusManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(fmt::format("cannot open manifest '{}'", path.string()));
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("manifest '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  CorpusManifest m;
  try {
    m.seed = doc.at("seed").get<std::uint64_t>();
    const json& d = doc.at("degradation");
    m.degradation.scale = d.at("scale");
    m.degradation.blur = blur_from_json(d.at("blur"));
    m.degradation.noise = noise_from_json(d.at("noise"));
    m.degradation.shift = shift_from_json(d.at("shift"));
    m.degradation.downsampler = parse_filter(d.at("downsampler").get<std::string>());
    for (const json& e : doc.at("entries")) {
      ManifestEntry entry;
      entry.id = e.at("id");
      entry.role = parse_role(e.at("role").get<std::string>());
      entry.hr = path_from_json(e, "hr");
      entry.lr_real = path_from_json(e, "lr_real");
      entry.lr_syn = path_from_json(e, "lr_syn");
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("manifest '{}' is malformed: {}", path.string(), e.what()));
  }
  return m;
}

CorpusManifest synthesize_corpus(const fs::path& hr_dir, const DegradationSpec& spec,
                                 const fs::path& out_dir, std::uint64_t seed) {
  validate(spec);
  if (!fs::is_directory(hr_dir)) {
    throw std::invalid_argument(fmt::format("HR directory '{}' does not exist", hr_dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(hr_dir)) {
    if (item.is_regular_file() && item.path().extension() == ".png") files.push_back(item.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() < 2) {
    throw std::invalid_argument(fmt::format("HR directory '{}' holds {} PNG images, need at least 2",
                                            hr_dir.string(), files.size()));
  }

  std::vector<Image> images;
  std::vector<std::string> offenders;
  for (const auto& f : files) {
    try {
      Image img = load_image(f);
      if (img.height() % spec.scale != 0 || img.width() % spec.scale != 0) {
        offenders.push_back(fmt::format("{} ({}x{} not divisible by {})", f.filename().string(),
                                        img.height(), img.width(), spec.scale));
        continue;
      }
      images.push_back(std::move(img));
    } catch (const LoadError& e) {
      offenders.push_back(fmt::format("{} ({})", f.filename().string(), e.what()));
    }
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& o : offenders) list += "\n  " + o;
    throw std::invalid_argument(fmt::format("unusable HR images:{}", list));
  }

  for (const char* sub : {"hr", "lr_syn", "lr_real"}) fs::create_directories(out_dir / sub);

  CorpusManifest manifest;
  manifest.seed = seed;
  manifest.degradation = spec;
  const std::size_t n_hr = hr_domain_count(files.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string id = files[i].stem().string();
    if (!seen.insert(id).second) throw std::invalid_argument(fmt::format("duplicate image id '{}'", id));
    const Image& hr = images[i];
    Rng rng = derive_rng(seed, id);
    const Image lr_syn = synthetic_lr(hr, spec.scale, spec.downsampler);
    const Image lr_real = degrade(hr, spec, rng);

    ManifestEntry entry;
    entry.id = id;
    entry.role = i < n_hr ? DomainRole::kHr : DomainRole::kLr;
    entry.hr = "hr/" + id + ".png";
    entry.lr_syn = "lr_syn/" + id + ".png";
    entry.lr_real = "lr_real/" + id + ".png";
    save_image(hr, out_dir / *entry.hr);
    save_image(lr_syn, out_dir / *entry.lr_syn);
    save_image(lr_real, out_dir / *entry.lr_real);
    manifest.entries.push_back(std::move(entry));
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace cyclesr
