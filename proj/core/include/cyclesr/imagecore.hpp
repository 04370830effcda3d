#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cyclesr {

/// Score assigned to zero-MSE pairs so that averages over image sets stay finite.
inline constexpr double kPsnrCap = 100.0;

/// Thrown when an image file cannot be read or decoded.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an image file cannot be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Planar RGB raster of doubles, laid out [channel][row][column].
///
/// Nominal range is [0, 1]; values are only clamped when written to disk, so
/// intermediate results (noise, sharpening) may leave that range.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int height, int width, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return data_.empty(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<double> channel(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> channel(int c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  /// Sub-rectangle copy; the rectangle must lie inside the image.
  Image crop(int top, int left, int height, int width) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Throws std::invalid_argument unless the image is non-empty and finite.
void require_valid(const Image& img, const char* what);

/// Reads an 8- or 16-bit PNG. Grayscale and palette images are expanded to
/// RGB; alpha is dropped. Values are divided by the bit-depth maximum.
Image load_image(const std::filesystem::path& path);

/// Clamps to [0,1], quantizes with round(v*255) and writes an 8-bit RGB PNG.
void save_image(const Image& img, const std::filesystem::path& path);

/// The 8-bit code save_image writes for a value.
unsigned char quantize_u8(double v);

// ---------------------------------------------------------------------------
// Resampling

enum class ResampleFilter { kBicubic, kBilinear, kNearest };

/// Keys cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

/// Mirrors an out-of-range index back into [0, n) (edge sample repeated).
int reflect_index(int i, int n);

/// Separable resampling by `scale` (> 0). Output size is floor(h*scale) x
/// floor(w*scale). When downscaling the kernel is stretched by 1/scale
/// (antialiasing), matching the usual bicubic imresize convention. Pixel
/// centers are aligned, boundaries use reflect handling. scale == 1 returns a
/// copy.
Image resample(const Image& img, double scale, ResampleFilter filter);

inline Image bicubic_resample(const Image& img, double scale) {
  return resample(img, scale, ResampleFilter::kBicubic);
}

// ---------------------------------------------------------------------------
// Quality metrics

struct Shift {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Shift&, const Shift&) = default;
};

struct EvalResult {
  double psnr = 0.0;
  double ssim = 0.0;
  Shift best_shift;
  std::optional<int> crop;
  int border_ignored = 0;
};

double mse(const Image& a, const Image& b);

/// 10*log10(peak^2 / MSE), clamped to [0, kPsnrCap].
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, range 1), valid
/// windows only, averaged over RGB channels.
double ssim(const Image& a, const Image& b);

struct SsimConstants {
  static constexpr int kWindow = 11;
  static constexpr double kSigma = 1.5;
  static constexpr double kC1 = 0.01 * 0.01;
  static constexpr double kC2 = 0.03 * 0.03;
};

struct ShiftProtocol {
  int max_shift = 0;
  int border = 0;
  std::optional<int> center_crop;
};

/// Exhaustive search over translations (dx, dy) in [0, max_shift]^2 where
/// sr(y + dy, x + dx) is compared with hr(y, x). The comparison window is the
/// same for every candidate: hr rows/cols [border, size - border - max_shift),
/// optionally reduced to a centered square of side center_crop. Returns the
/// first shift (row-major over dy, then dx) with the highest PSNR and the SSIM
/// at that shift.
EvalResult shift_tolerant_score(const Image& sr, const Image& hr, const ShiftProtocol& protocol);

/// Per-channel affine map giving `img` the mean and standard deviation of `ref`.
Image normalize_to_reference(const Image& img, const Image& ref);

struct ChannelStats {
  double mean = 0.0;
  double stddev = 0.0;
};
ChannelStats channel_stats(std::span<const double> values);

}  // namespace cyclesr
