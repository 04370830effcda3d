#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cyclesr/imagecore.hpp"

namespace cyclesr {

using Rng = std::mt19937_64;

/// Generator for one image, derived from the corpus seed and the image id so
/// that images can be processed in any order.
Rng derive_rng(std::uint64_t seed, std::string_view stream);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Dense 2-D filter, row-major. Explicit kernels must be non-negative and sum to one.
struct Kernel {
  int rows = 1;
  int cols = 1;
  std::vector<double> weights{1.0};

  double at(int y, int x) const { return weights[static_cast<std::size_t>(y) * cols + x]; }
  double sum() const;
  friend bool operator==(const Kernel&, const Kernel&) = default;
};

/// Throws std::invalid_argument for negative entries or a sum outside 1 +- 1e-6.
void validate_kernel(const Kernel& k);

struct DiracBlur {
  friend bool operator==(const DiracBlur&, const DiracBlur&) = default;
};
/// Per-image sigma drawn uniformly from [sigma, sigma_max] when sigma_max > sigma.
struct GaussianBlur {
  double sigma = 0.0;
  double sigma_max = 0.0;
  friend bool operator==(const GaussianBlur&, const GaussianBlur&) = default;
};
struct MotionBlur {
  double length = 1.0;
  double angle = 0.0;  // radians, counter-clockwise from +x
  friend bool operator==(const MotionBlur&, const MotionBlur&) = default;
};
using BlurSpec = std::variant<DiracBlur, GaussianBlur, MotionBlur, Kernel>;

struct NoNoise {
  friend bool operator==(const NoNoise&, const NoNoise&) = default;
};
struct GaussianNoise {
  double sigma = 0.0;
  double sigma_max = 0.0;
  friend bool operator==(const GaussianNoise&, const GaussianNoise&) = default;
};
/// Poisson shot noise; `peak` is the expected photon count at value 1.0.
struct PoissonNoise {
  double peak = 255.0;
  double peak_max = 0.0;
  friend bool operator==(const PoissonNoise&, const PoissonNoise&) = default;
};
using NoiseSpec = std::variant<NoNoise, GaussianNoise, PoissonNoise>;

struct FixedShift {
  Shift shift;
  friend bool operator==(const FixedShift&, const FixedShift&) = default;
};
/// dx and dy drawn independently and uniformly from [0, max_shift].
struct RandomShift {
  int max_shift = 0;
  friend bool operator==(const RandomShift&, const RandomShift&) = default;
};
using ShiftSpec = std::variant<FixedShift, RandomShift>;

struct DegradationSpec {
  int scale = 4;
  BlurSpec blur = DiracBlur{};
  NoiseSpec noise = NoNoise{};
  ShiftSpec shift = FixedShift{};
  ResampleFilter downsampler = ResampleFilter::kBicubic;

  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

void validate(const DegradationSpec& spec);

// Compact text forms used by config files and the CLI:
//   blur:  dirac | gaussian:1.5 | gaussian:1.0~2.0 | motion:9:0.785
//   noise: none | gaussian:0.02 | gaussian:0.01~0.03 | poisson:256 | poisson:64~512
//   shift: none | fixed:dx,dy | random:2
//   downsampler: bicubic | bilinear | nearest
BlurSpec parse_blur(std::string_view text);
NoiseSpec parse_noise(std::string_view text);
ShiftSpec parse_shift(std::string_view text);
ResampleFilter parse_filter(std::string_view text);
std::string to_string(const BlurSpec& blur);
std::string to_string(const NoiseSpec& noise);
std::string to_string(const ShiftSpec& shift);
std::string to_string(ResampleFilter filter);

/// Normalized kernel for a parametric blur. Gaussian kernels are truncated at
/// +-ceil(3 sigma); motion kernels are a rasterized unit-mass line segment.
/// Range-valued gaussian specs use their lower bound.
Kernel make_kernel(const BlurSpec& blur);
Kernel gaussian_kernel(double sigma);
Kernel motion_kernel(double length, double angle);

/// 2-D correlation per channel with reflect padding; output has the input shape.
Image apply_blur(const Image& img, const Kernel& kernel);

/// Adds noise; the result is not clamped.
Image apply_noise(const Image& img, const NoiseSpec& noise, Rng& rng);

/// Integer translation: out(c, i, j) = in(c, i - dy, j - dx), vacated pixels reflect-filled.
Image apply_shift(const Image& img, int dx, int dy);

/// Clean synthetic LR: downsampling by 1/scale with the given filter, nothing else.
Image synthetic_lr(const Image& hr, int scale, ResampleFilter filter = ResampleFilter::kBicubic);

/// blur -> downsample by 1/scale -> shift -> noise. Deterministic given the rng state.
Image degrade(const Image& hr, const DegradationSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------
// Corpus synthesis

enum class DomainRole { kHr, kLr };
std::string to_string(DomainRole role);
DomainRole parse_role(std::string_view text);

struct ManifestEntry {
  std::string id;
  DomainRole role = DomainRole::kHr;
  std::optional<std::string> hr;  // paths relative to the manifest directory
  std::optional<std::string> lr_real;
  std::optional<std::string> lr_syn;
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  DegradationSpec degradation;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> with_role(DomainRole role) const;
};

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);
/// Parses JSON only; file existence and split checks happen in load_manifest.
CorpusManifest read_manifest(const std::filesystem::path& path);

/// Number of ids assigned to the HR domain for a corpus of n images: ceil(n/2).
inline std::size_t hr_domain_count(std::size_t n) { return (n + 1) / 2; }

/// Degrades every PNG in hr_dir (sorted by file name, id = file stem) and
/// writes out_dir/{hr,lr_syn,lr_real}/<id>.png plus out_dir/manifest.json.
/// The first ceil(n/2) ids form the HR domain, the rest the LR domain.
CorpusManifest synthesize_corpus(const std::filesystem::path& hr_dir, const DegradationSpec& spec,
                                 const std::filesystem::path& out_dir, std::uint64_t seed);

/// Piecewise-smooth test image: gradient background, anti-aliased shapes and
/// striped texture patches.
Image procedural_image(int height, int width, std::uint64_t seed);

}  // namespace cyclesr
