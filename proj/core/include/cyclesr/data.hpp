#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cyclesr/degrade.hpp"
#include "cyclesr/imagecore.hpp"

namespace cyclesr {

/// One corpus image with whichever renditions the manifest provides.
struct DatasetEntry {
  std::string id;
  DomainRole role = DomainRole::kHr;
  std::optional<Image> hr;
  std::optional<Image> lr_syn;
  std::optional<Image> lr_real;
};

/// In-memory view of a validated manifest: the HR-domain split (HR images
/// with their synthetic LR) and the disjoint LR-domain split (real LR only).
class Dataset {
 public:
  Dataset(std::vector<DatasetEntry> hr_domain, std::vector<DatasetEntry> lr_domain, int scale);

  const std::vector<DatasetEntry>& hr_domain() const { return hr_domain_; }
  const std::vector<DatasetEntry>& lr_domain() const { return lr_domain_; }
  int scale() const { return scale_; }
  /// True when every HR-domain entry also has its real LR rendition, which
  /// the paired-supervision baseline needs.
  bool has_paired_real() const;

 private:
  std::vector<DatasetEntry> hr_domain_;
  std::vector<DatasetEntry> lr_domain_;
  int scale_;
};

/// Reads and validates a manifest: every referenced file must exist, ids must
/// be unique and each id belongs to exactly one split. HR-domain entries need
/// hr and lr_syn, LR-domain entries need lr_real; LR-domain HR images are
/// never loaded.
Dataset load_manifest(const std::filesystem::path& path);

/// Ground truth plus degraded input for evaluation.
struct EvalPair {
  std::string id;
  Image hr;
  Image lr_real;
  std::optional<Image> lr_syn;
};

/// Every manifest entry that has both hr and lr_real, regardless of role,
/// in manifest order. Throws LoadError when there are none.
std::vector<EvalPair> load_eval_pairs(const std::filesystem::path& path);

struct TrainElement {
  Image hr;       // P x P
  Image lr_syn;   // P/s x P/s, aligned with hr
  Image lr_real;  // P/s x P/s, unpaired
};

/// Aligned P x P / (P/s) x (P/s) crop of (hr, lr_pair) at LR-grid coordinates
/// plus an independent crop of lr_real.
TrainElement sample_patch(const Image& hr, const Image& lr_pair, const Image& lr_real, int hr_patch,
                          int scale, Rng& rng);

/// Dihedral transform t in [0, 8): rotate by 90 degrees (t % 4) times
/// counter-clockwise, then mirror left-right when t >= 4.
Image dihedral(const Image& img, int t);

/// Applies one random dihedral transform to hr and lr_syn together and an
/// independent one to lr_real. Returns the two transform indices drawn.
std::pair<int, int> augment(TrainElement& element, Rng& rng);

struct TrainBatch {
  torch::Tensor hr;       // [B, 3, P, P]
  torch::Tensor lr_syn;   // [B, 3, P/s, P/s]; the paired LR (real LR for the sr_paired baseline)
  torch::Tensor lr_real;  // [B, 3, P/s, P/s]
  std::vector<std::string> hr_ids;
  std::vector<std::string> real_ids;
};

enum class PairSource { kSynthetic, kReal };

struct BatchConfig {
  int batch_size = 32;
  int hr_patch = 120;
  int patches_per_image = 1;
  bool augment = true;
  PairSource pair_source = PairSource::kSynthetic;
};

/// Deterministic epoch-shuffled batches. Batch (epoch, index) depends only on
/// the dataset, config, seed and those two numbers, so a resumed run sees the
/// same stream. Partial batches are dropped.
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, BatchConfig config, std::uint64_t seed);

  int batches_per_epoch() const;
  TrainBatch batch(int epoch, int index);

 private:
  void plan_epoch(int epoch);

  const Dataset* data_;
  BatchConfig config_;
  std::uint64_t seed_;
  int planned_epoch_ = -1;
  std::vector<int> source_order_;
  std::vector<int> real_order_;
};

/// Stacks images of equal size into a float [B, 3, H, W] tensor.
torch::Tensor to_tensor(const std::vector<Image>& images);
torch::Tensor to_tensor(const Image& image);
/// Converts [3, H, W] or [1, 3, H, W] back to an image.
Image to_image(const torch::Tensor& t);

}  // namespace cyclesr
