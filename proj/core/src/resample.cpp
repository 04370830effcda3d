#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "cyclesr/imagecore.hpp"

namespace cyclesr {

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double t = std::abs(x);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

namespace {

double triangle_kernel(double x) {
  const double t = std::abs(x);
  return t < 1.0 ? 1.0 - t : 0.0;
}

struct Tap {
  int index;
  double weight;
};

// One list of (source index, weight) per output sample.
std::vector<std::vector<Tap>> axis_weights(int n_in, int n_out, double scale, ResampleFilter filter) {
  std::vector<std::vector<Tap>> table(n_out);
  if (filter == ResampleFilter::kNearest) {
    for (int i = 0; i < n_out; ++i) {
      int src = static_cast<int>(std::floor((i + 0.5) / scale));
      src = std::min(std::max(src, 0), n_in - 1);
      table[i].push_back({src, 1.0});
    }
    return table;
  }

  const double support = filter == ResampleFilter::kBicubic ? 2.0 : 1.0;
  const double stretch = scale < 1.0 ? scale : 1.0;
  const double radius = support / stretch;
  for (int i = 0; i < n_out; ++i) {
    const double center = (i + 0.5) / scale - 0.5;
    const int first = static_cast<int>(std::floor(center - radius));
    const int last = static_cast<int>(std::ceil(center + radius));
    double total = 0.0;
    std::vector<Tap>& taps = table[i];
    for (int j = first; j <= last; ++j) {
      const double arg = (center - j) * stretch;
      const double w = filter == ResampleFilter::kBicubic ? cubic_kernel(arg) : triangle_kernel(arg);
      if (w == 0.0) continue;
      taps.push_back({reflect_index(j, n_in), w});
      total += w;
    }
    for (Tap& t : taps) t.weight /= total;
  }
  return table;
}

}  // namespace

Image resample(const Image& img, double scale, ResampleFilter filter) {
  require_valid(img, "resample");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument(fmt::format("resample: scale must be positive, got {}", scale));
  }
  if (scale == 1.0) return img;

  const int out_h = static_cast<int>(std::floor(img.height() * scale + 1e-9));
  const int out_w = static_cast<int>(std::floor(img.width() * scale + 1e-9));
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument(fmt::format("resample: {}x{} at scale {} gives an empty image",
                                            img.height(), img.width(), scale));
  }

  const auto col_taps = axis_weights(img.width(), out_w, scale, filter);
  const auto row_taps = axis_weights(img.height(), out_h, scale, filter);

  Image horizontal(img.height(), out_w);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (const Tap& t : col_taps[x]) acc += t.weight * img.at(c, y, t.index);
        horizontal.at(c, y, x) = acc;
      }
    }
  }

  Image out(out_h, out_w);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (const Tap& t : row_taps[y]) acc += t.weight * horizontal.at(c, t.index, x);
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

}  // namespace cyclesr
