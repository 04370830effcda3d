#include "cyclesr/data.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace cyclesr {

namespace fs = std::filesystem;

Dataset::Dataset(std::vector<DatasetEntry> hr_domain, std::vector<DatasetEntry> lr_domain, int scale)
    : hr_domain_(std::move(hr_domain)), lr_domain_(std::move(lr_domain)), scale_(scale) {
  if (scale < 1) throw std::invalid_argument("dataset: scale must be >= 1");
  for (const auto& e : hr_domain_) {
    if (!e.hr || !e.lr_syn) throw std::invalid_argument(fmt::format("dataset: HR-domain entry '{}' lacks hr or lr_syn", e.id));
    if (e.hr->height() != e.lr_syn->height() * scale || e.hr->width() != e.lr_syn->width() * scale) {
      throw std::invalid_argument(fmt::format("dataset: '{}' hr and lr_syn sizes disagree with scale {}", e.id, scale));
    }
  }
  for (const auto& e : lr_domain_) {
    if (!e.lr_real) throw std::invalid_argument(fmt::format("dataset: LR-domain entry '{}' lacks lr_real", e.id));
  }
}

bool Dataset::has_paired_real() const {
  return !hr_domain_.empty() &&
         std::all_of(hr_domain_.begin(), hr_domain_.end(), [](const DatasetEntry& e) { return e.lr_real.has_value(); });
}

Dataset load_manifest(const fs::path& path) {
  const CorpusManifest manifest = read_manifest(path);
  const fs::path root = path.parent_path();

  std::set<std::string> ids;
  std::vector<std::string> problems;
  for (const auto& e : manifest.entries) {
    if (!ids.insert(e.id).second) problems.push_back(fmt::format("id '{}' appears more than once", e.id));
    for (const auto* p : {&e.hr, &e.lr_syn, &e.lr_real}) {
      if (*p && !fs::exists(root / **p)) problems.push_back(fmt::format("missing file '{}'", (root / **p).string()));
    }
    if (e.role == DomainRole::kHr && (!e.hr || !e.lr_syn)) {
      problems.push_back(fmt::format("HR-domain entry '{}' needs hr and lr_syn", e.id));
    }
    if (e.role == DomainRole::kLr && !e.lr_real) {
      problems.push_back(fmt::format("LR-domain entry '{}' needs lr_real", e.id));
    }
  }
  if (!problems.empty()) {
    std::string list;
    for (const auto& p : problems) list += "\n  " + p;
    throw LoadError(fmt::format("invalid manifest '{}':{}", path.string(), list));
  }

  std::vector<DatasetEntry> hr_domain;
  std::vector<DatasetEntry> lr_domain;
  for (const auto& e : manifest.entries) {
    DatasetEntry entry{e.id, e.role, {}, {}, {}};
    if (e.role == DomainRole::kHr) {
      entry.hr = load_image(root / *e.hr);
      entry.lr_syn = load_image(root / *e.lr_syn);
      if (e.lr_real) entry.lr_real = load_image(root / *e.lr_real);
      hr_domain.push_back(std::move(entry));
    } else {
      entry.lr_real = load_image(root / *e.lr_real);
      lr_domain.push_back(std::move(entry));
    }
  }
  return Dataset(std::move(hr_domain), std::move(lr_domain), manifest.degradation.scale);
}

std::vector<EvalPair> load_eval_pairs(const fs::path& path) {
  const CorpusManifest manifest = read_manifest(path);
  const fs::path root = path.parent_path();
  std::vector<EvalPair> out;
  for (const auto& e : manifest.entries) {
    if (!e.hr || !e.lr_real) continue;
    EvalPair pair{e.id, load_image(root / *e.hr), load_image(root / *e.lr_real), {}};
    if (e.lr_syn) pair.lr_syn = load_image(root / *e.lr_syn);
    out.push_back(std::move(pair));
  }
  if (out.empty()) throw LoadError(fmt::format("manifest '{}' has no entries with hr and lr_real", path.string()));
  return out;
}

// ---------------------------------------------------------------------------

TrainElement sample_patch(const Image& hr, const Image& lr_pair, const Image& lr_real, int hr_patch, int scale,
                          Rng& rng) {
  if (scale < 1 || hr_patch < scale || hr_patch % scale != 0) {
    throw std::invalid_argument(fmt::format("sample_patch: patch {} not divisible by scale {}", hr_patch, scale));
  }
  const int lr_patch = hr_patch / scale;
  if (hr.height() != lr_pair.height() * scale || hr.width() != lr_pair.width() * scale) {
    throw std::invalid_argument("sample_patch: hr and paired LR sizes disagree with the scale");
  }
  if (lr_pair.height() < lr_patch || lr_pair.width() < lr_patch) {
    throw std::invalid_argument(fmt::format("sample_patch: {}x{} HR image smaller than {} patch", hr.height(),
                                            hr.width(), hr_patch));
  }
  if (lr_real.height() < lr_patch || lr_real.width() < lr_patch) {
    throw std::invalid_argument(fmt::format("sample_patch: {}x{} real LR image smaller than {} patch",
                                            lr_real.height(), lr_real.width(), lr_patch));
  }
  std::uniform_int_distribution<int> pick_y(0, lr_pair.height() - lr_patch);
  std::uniform_int_distribution<int> pick_x(0, lr_pair.width() - lr_patch);
  const int ly = pick_y(rng);
  const int lx = pick_x(rng);
  std::uniform_int_distribution<int> real_y(0, lr_real.height() - lr_patch);
  std::uniform_int_distribution<int> real_x(0, lr_real.width() - lr_patch);
  const int ry = real_y(rng);
  const int rx = real_x(rng);
  return {hr.crop(ly * scale, lx * scale, hr_patch, hr_patch), lr_pair.crop(ly, lx, lr_patch, lr_patch),
          lr_real.crop(ry, rx, lr_patch, lr_patch)};
}

Image dihedral(const Image& img, int t) {
  if (t < 0 || t >= 8) throw std::invalid_argument(fmt::format("dihedral: transform {} out of range", t));
  const int turns = t % 4;
  if (turns % 2 == 1 && img.height() != img.width()) {
    throw std::invalid_argument("dihedral: 90-degree rotation of a non-square patch");
  }
  if (t == 0) return img;
  const int h = img.height();
  const int w = img.width();
  Image out(h, w);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Source coordinate of output (y, x) for a counter-clockwise rotation.
        int sy = y;
        int sx = t >= 4 ? w - 1 - x : x;
        for (int k = 0; k < turns; ++k) {
          const int ny = sx;
          const int nx = w - 1 - sy;
          sy = ny;
          sx = nx;
        }
        out.at(c, y, x) = img.at(c, sy, sx);
      }
    }
  }
  return out;
}

std::pair<int, int> augment(TrainElement& element, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, 7);
  const int paired = pick(rng);
  const int unpaired = pick(rng);
  element.hr = dihedral(element.hr, paired);
  element.lr_syn = dihedral(element.lr_syn, paired);
  element.lr_real = dihedral(element.lr_real, unpaired);
  return {paired, unpaired};
}

// ---------------------------------------------------------------------------

BatchIterator::BatchIterator(const Dataset& data, BatchConfig config, std::uint64_t seed)
    : data_(&data), config_(config), seed_(seed) {
  if (config_.batch_size < 1 || config_.patches_per_image < 1) {
    throw std::invalid_argument("batch iterator: batch size and patches per image must be >= 1");
  }
  if (config_.hr_patch % data.scale() != 0) {
    throw std::invalid_argument(fmt::format("batch iterator: HR patch {} not divisible by scale {}",
                                            config_.hr_patch, data.scale()));
  }
  const std::size_t sources = data.hr_domain().size() * config_.patches_per_image;
  if (sources < static_cast<std::size_t>(config_.batch_size)) {
    throw std::invalid_argument(fmt::format("batch iterator: {} patch sources cannot fill a batch of {}", sources,
                                            config_.batch_size));
  }
  if (config_.pair_source == PairSource::kReal && !data.has_paired_real()) {
    throw std::invalid_argument("batch iterator: paired real LR requested but the manifest has none");
  }
}

int BatchIterator::batches_per_epoch() const {
  return static_cast<int>(data_->hr_domain().size() * config_.patches_per_image / config_.batch_size);
}

void BatchIterator::plan_epoch(int epoch) {
  if (planned_epoch_ == epoch) return;
  Rng rng(mix_seed(seed_, 0x65706f6368ULL + static_cast<std::uint64_t>(epoch)));
  source_order_.resize(data_->hr_domain().size() * config_.patches_per_image);
  std::iota(source_order_.begin(), source_order_.end(), 0);
  std::shuffle(source_order_.begin(), source_order_.end(), rng);
  real_order_.resize(data_->lr_domain().size());
  std::iota(real_order_.begin(), real_order_.end(), 0);
  std::shuffle(real_order_.begin(), real_order_.end(), rng);
  planned_epoch_ = epoch;
}

TrainBatch BatchIterator::batch(int epoch, int index) {
  if (index < 0 || index >= batches_per_epoch()) {
    throw std::out_of_range(fmt::format("batch index {} outside epoch of {}", index, batches_per_epoch()));
  }
  plan_epoch(epoch);
  const auto& hr_domain = data_->hr_domain();
  const auto& lr_domain = data_->lr_domain();
  const bool has_real = !lr_domain.empty();

  std::vector<Image> hr, lr_pair, lr_real;
  TrainBatch out;
  for (int i = 0; i < config_.batch_size; ++i) {
    const int slot = index * config_.batch_size + i;
    const DatasetEntry& src = hr_domain[source_order_[slot] / config_.patches_per_image];
    const Image& pair_img = config_.pair_source == PairSource::kReal ? *src.lr_real : *src.lr_syn;
    const DatasetEntry* real = has_real ? &lr_domain[real_order_[slot % real_order_.size()]] : nullptr;
    // Without an LR domain the paired LR stands in; its crop is never used.
    const Image& real_img = real ? *real->lr_real : pair_img;

    Rng rng(mix_seed(mix_seed(seed_, static_cast<std::uint64_t>(epoch)), static_cast<std::uint64_t>(slot)));
    TrainElement element = sample_patch(*src.hr, pair_img, real_img, config_.hr_patch, data_->scale(), rng);
    if (config_.augment) augment(element, rng);
    hr.push_back(std::move(element.hr));
    lr_pair.push_back(std::move(element.lr_syn));
    out.hr_ids.push_back(src.id);
    if (real) {
      lr_real.push_back(std::move(element.lr_real));
      out.real_ids.push_back(real->id);
    }
  }
  out.hr = to_tensor(hr);
  out.lr_syn = to_tensor(lr_pair);
  if (!lr_real.empty()) out.lr_real = to_tensor(lr_real);
  return out;
}

// ---------------------------------------------------------------------------

torch::Tensor to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("to_tensor: no images");
  const int h = images.front().height();
  const int w = images.front().width();
  torch::Tensor out = torch::empty({static_cast<std::int64_t>(images.size()), 3, h, w}, torch::kFloat);
  float* dst = out.data_ptr<float>();
  for (const Image& img : images) {
    if (img.height() != h || img.width() != w) throw std::invalid_argument("to_tensor: images differ in size");
    for (double v : img.values()) *dst++ = static_cast<float>(v);
  }
  return out;
}

torch::Tensor to_tensor(const Image& image) { return to_tensor(std::vector<Image>{image}); }

Image to_image(const torch::Tensor& t) {
  torch::Tensor x = t.detach();
  if (x.dim() == 4) {
    if (x.size(0) != 1) throw std::invalid_argument("to_image: batch must hold a single image");
    x = x[0];
  }
  if (x.dim() != 3 || x.size(0) != 3) throw std::invalid_argument("to_image: expected a [3, H, W] tensor");
  x = x.to(torch::kDouble).contiguous();
  Image img(static_cast<int>(x.size(1)), static_cast<int>(x.size(2)));
  const double* src = x.data_ptr<double>();
  std::copy(src, src + img.size(), img.values().begin());
  return img;
}

}  // namespace cyclesr
