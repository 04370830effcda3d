#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "cyclesr/imagecore.hpp"

namespace cyclesr {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.empty() || b.empty()) throw std::invalid_argument(fmt::format("{}: empty image", what));
  if (!a.same_shape(b)) {
    throw std::invalid_argument(fmt::format("{}: shape mismatch {}x{} vs {}x{}", what, a.height(),
                                            a.width(), b.height(), b.width()));
  }
}

double psnr_from_mse(double err, double peak) {
  if (err <= 0.0) return kPsnrCap;
  const double value = 10.0 * std::log10(peak * peak / err);
  return std::clamp(value, 0.0, kPsnrCap);
}

std::array<double, SsimConstants::kWindow> gaussian_taps() {
  std::array<double, SsimConstants::kWindow> taps{};
  const int half = SsimConstants::kWindow / 2;
  double total = 0.0;
  for (int i = 0; i < SsimConstants::kWindow; ++i) {
    const double d = i - half;
    taps[i] = std::exp(-d * d / (2.0 * SsimConstants::kSigma * SsimConstants::kSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Valid-mode separable Gaussian filter of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w) {
  static const auto taps = gaussian_taps();
  constexpr int k = SsimConstants::kWindow;
  const int oh = h - k + 1;
  const int ow = w - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * plane[static_cast<std::size_t>(y) * w + x + t];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

double ssim_plane(std::span<const double> a, std::span<const double> b, int h, int w) {
  const std::size_t n = a.size();
  std::vector<double> pa(a.begin(), a.end());
  std::vector<double> pb(b.begin(), b.end());
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(pa, h, w);
  const auto mu_b = filter_valid(pb, h, w);
  const auto e_aa = filter_valid(aa, h, w);
  const auto e_bb = filter_valid(bb, h, w);
  const auto e_ab = filter_valid(ab, h, w);

  constexpr double c1 = SsimConstants::kC1;
  constexpr double c2 = SsimConstants::kC2;
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  const auto va = a.values();
  const auto vb = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(va.size());
}

double psnr(const Image& a, const Image& b, double peak) {
  return psnr_from_mse(mse(a, b), peak);
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  if (a.height() < SsimConstants::kWindow || a.width() < SsimConstants::kWindow) {
    throw std::invalid_argument(fmt::format("ssim: {}x{} image smaller than the {}x{} window",
                                            a.height(), a.width(), SsimConstants::kWindow,
                                            SsimConstants::kWindow));
  }
  double total = 0.0;
  for (int c = 0; c < Image::kChannels; ++c) {
    total += ssim_plane(a.channel(c), b.channel(c), a.height(), a.width());
  }
  return total / Image::kChannels;
}

EvalResult shift_tolerant_score(const Image& sr, const Image& hr, const ShiftProtocol& protocol) {
  require_same_shape(sr, hr, "shift_tolerant_score");
  if (protocol.max_shift < 0 || protocol.border < 0) {
    throw std::invalid_argument("shift_tolerant_score: max_shift and border must be non-negative");
  }
  const int avail_h = hr.height() - 2 * protocol.border - protocol.max_shift;
  const int avail_w = hr.width() - 2 * protocol.border - protocol.max_shift;
  int top = protocol.border;
  int left = protocol.border;
  int rh = avail_h;
  int rw = avail_w;
  if (protocol.center_crop) {
    const int side = *protocol.center_crop;
    if (side < 1 || side > avail_h || side > avail_w) {
      throw std::invalid_argument(fmt::format(
          "shift_tolerant_score: center crop {} does not fit the {}x{} comparison region", side,
          std::max(avail_h, 0), std::max(avail_w, 0)));
    }
    top += (avail_h - side) / 2;
    left += (avail_w - side) / 2;
    rh = rw = side;
  }
  if (rh < 1 || rw < 1) {
    throw std::invalid_argument("shift_tolerant_score: empty comparison region");
  }

  const double count = static_cast<double>(Image::kChannels) * rh * rw;
  double best_psnr = 0.0;
  Shift best{};
  bool first = true;
  for (int dy = 0; dy <= protocol.max_shift; ++dy) {
    for (int dx = 0; dx <= protocol.max_shift; ++dx) {
      double acc = 0.0;
      for (int c = 0; c < Image::kChannels; ++c) {
        for (int y = 0; y < rh; ++y) {
          for (int x = 0; x < rw; ++x) {
            const double d = sr.at(c, top + y + dy, left + x + dx) - hr.at(c, top + y, left + x);
            acc += d * d;
          }
        }
      }
      const double score = psnr_from_mse(acc / count, 1.0);
      if (first || score > best_psnr) {
        best_psnr = score;
        best = {dx, dy};
        first = false;
      }
    }
  }

  EvalResult result;
  result.best_shift = best;
  result.crop = protocol.center_crop;
  result.border_ignored = protocol.border;
  const Image hr_region = hr.crop(top, left, rh, rw);
  const Image sr_region = sr.crop(top + best.dy, left + best.dx, rh, rw);
  result.psnr = best_psnr;
  result.ssim = ssim(sr_region, hr_region);
  return result;
}

}  // namespace cyclesr
