#include "cyclesr/degrade.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace cyclesr {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng derive_rng(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : stream) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return Rng(mix_seed(seed, h));
}

double Kernel::sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void validate_kernel(const Kernel& k) {
  if (k.rows < 1 || k.cols < 1 || k.weights.size() != static_cast<std::size_t>(k.rows) * k.cols) {
    throw std::invalid_argument("kernel: weights do not match its dimensions");
  }
  for (double w : k.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("kernel: negative or non-finite entry");
  }
  if (std::abs(k.sum() - 1.0) > 1e-6) {
    throw std::invalid_argument(fmt::format("kernel: entries sum to {}, expected 1", k.sum()));
  }
}

void validate(const DegradationSpec& spec) {
  if (spec.scale < 1) throw std::invalid_argument("degradation: scale must be >= 1");
  if (const auto* g = std::get_if<GaussianBlur>(&spec.blur)) {
    if (g->sigma < 0.0 || g->sigma_max < 0.0) throw std::invalid_argument("degradation: blur sigma must be >= 0");
  } else if (const auto* m = std::get_if<MotionBlur>(&spec.blur)) {
    if (!(m->length >= 1.0)) throw std::invalid_argument("degradation: motion length must be >= 1");
  } else if (const auto* k = std::get_if<Kernel>(&spec.blur)) {
    validate_kernel(*k);
  }
  if (const auto* g = std::get_if<GaussianNoise>(&spec.noise)) {
    if (g->sigma < 0.0 || g->sigma_max < 0.0) throw std::invalid_argument("degradation: noise sigma must be >= 0");
  } else if (const auto* p = std::get_if<PoissonNoise>(&spec.noise)) {
    if (!(p->peak > 0.0) || p->peak_max < 0.0) throw std::invalid_argument("degradation: poisson peak must be > 0");
  }
  if (const auto* r = std::get_if<RandomShift>(&spec.shift)) {
    if (r->max_shift < 0) throw std::invalid_argument("degradation: shift_max must be >= 0");
  }
}

// ---------------------------------------------------------------------------
// Text forms

namespace {

double parse_double(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw std::invalid_argument(fmt::format("cannot parse {} from '{}'", what, text));
  }
  return value;
}

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw std::invalid_argument(fmt::format("cannot parse {} from '{}'", what, text));
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

// "a" or "a~b"
std::pair<double, double> parse_range(std::string_view text, std::string_view what) {
  const auto parts = split(text, '~');
  if (parts.size() == 1) {
    return {parse_double(parts[0], what), 0.0};
  }
  if (parts.size() == 2) {
    const double lo = parse_double(parts[0], what);
    const double hi = parse_double(parts[1], what);
    if (hi < lo) throw std::invalid_argument(fmt::format("{} range '{}' is reversed", what, text));
    return {lo, hi > lo ? hi : 0.0};
  }
  throw std::invalid_argument(fmt::format("malformed {} '{}'", what, text));
}

std::string format_range(double lo, double hi) {
  if (hi > lo) return fmt::format("{}~{}", lo, hi);
  return fmt::format("{}", lo);
}

// Draws from [lo, hi] only when the range is non-degenerate, so fixed
// parameters leave the generator untouched.
double draw_in_range(double lo, double hi, Rng& rng) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

BlurSpec parse_blur(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts[0] == "dirac" && parts.size() == 1) return DiracBlur{};
  if (parts[0] == "gaussian" && parts.size() == 2) {
    const auto [lo, hi] = parse_range(parts[1], "blur sigma");
    return GaussianBlur{lo, hi};
  }
  if (parts[0] == "motion" && parts.size() == 3) {
    return MotionBlur{parse_double(parts[1], "motion length"), parse_double(parts[2], "motion angle")};
  }
  throw std::invalid_argument(fmt::format("unknown blur '{}'", text));
}

NoiseSpec parse_noise(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts[0] == "none" && parts.size() == 1) return NoNoise{};
  if (parts[0] == "gaussian" && parts.size() == 2) {
    const auto [lo, hi] = parse_range(parts[1], "noise sigma");
    return GaussianNoise{lo, hi};
  }
  if (parts[0] == "poisson" && parts.size() == 2) {
    const auto [lo, hi] = parse_range(parts[1], "poisson peak");
    return PoissonNoise{lo, hi};
  }
  throw std::invalid_argument(fmt::format("unknown noise '{}'", text));
}

ShiftSpec parse_shift(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts[0] == "none" && parts.size() == 1) return FixedShift{};
  if (parts[0] == "fixed" && parts.size() == 2) {
    const auto xy = split(parts[1], ',');
    if (xy.size() != 2) throw std::invalid_argument(fmt::format("malformed shift '{}'", text));
    return FixedShift{{parse_int(xy[0], "shift dx"), parse_int(xy[1], "shift dy")}};
  }
  if (parts[0] == "random" && parts.size() == 2) {
    const int max_shift = parse_int(parts[1], "shift_max");
    if (max_shift < 0) throw std::invalid_argument(fmt::format("shift_max must be >= 0 in '{}'", text));
    return RandomShift{max_shift};
  }
  throw std::invalid_argument(fmt::format("unknown shift '{}'", text));
}

ResampleFilter parse_filter(std::string_view text) {
  if (text == "bicubic") return ResampleFilter::kBicubic;
  if (text == "bilinear") return ResampleFilter::kBilinear;
  if (text == "nearest") return ResampleFilter::kNearest;
  throw std::invalid_argument(fmt::format("unknown downsampler '{}'", text));
}

std::string to_string(const BlurSpec& blur) {
  if (std::holds_alternative<DiracBlur>(blur)) return "dirac";
  if (const auto* g = std::get_if<GaussianBlur>(&blur)) return "gaussian:" + format_range(g->sigma, g->sigma_max);
  if (const auto* m = std::get_if<MotionBlur>(&blur)) return fmt::format("motion:{}:{}", m->length, m->angle);
  const auto& k = std::get<Kernel>(blur);
  return fmt::format("explicit:{}x{}", k.rows, k.cols);
}

std::string to_string(const NoiseSpec& noise) {
  if (std::holds_alternative<NoNoise>(noise)) return "none";
  if (const auto* g = std::get_if<GaussianNoise>(&noise)) return "gaussian:" + format_range(g->sigma, g->sigma_max);
  const auto& p = std::get<PoissonNoise>(noise);
  return "poisson:" + format_range(p.peak, p.peak_max);
}

std::string to_string(const ShiftSpec& shift) {
  if (const auto* f = std::get_if<FixedShift>(&shift)) {
    if (f->shift == Shift{}) return "none";
    return fmt::format("fixed:{},{}", f->shift.dx, f->shift.dy);
  }
  return fmt::format("random:{}", std::get<RandomShift>(shift).max_shift);
}

std::string to_string(ResampleFilter filter) {
  switch (filter) {
    case ResampleFilter::kBicubic: return "bicubic";
    case ResampleFilter::kBilinear: return "bilinear";
    case ResampleFilter::kNearest: return "nearest";
  }
  return "bicubic";
}

// ---------------------------------------------------------------------------
// Kernels

Kernel gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian kernel: sigma must be >= 0");
  if (sigma == 0.0) return Kernel{};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const int side = 2 * radius + 1;
  Kernel k{side, side, std::vector<double>(static_cast<std::size_t>(side) * side)};
  double total = 0.0;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dy = y - radius;
      const double dx = x - radius;
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k.weights[static_cast<std::size_t>(y) * side + x] = w;
      total += w;
    }
  }
  for (double& w : k.weights) w /= total;
  return k;
}

Kernel motion_kernel(double length, double angle) {
  if (!(length >= 1.0)) throw std::invalid_argument("motion kernel: length must be >= 1");
  const int radius = static_cast<int>(std::ceil(length / 2.0));
  const int side = 2 * radius + 1;
  Kernel k{side, side, std::vector<double>(static_cast<std::size_t>(side) * side, 0.0)};
  const int samples = std::max(2, static_cast<int>(std::ceil(length * 16.0)));
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (int i = 0; i < samples; ++i) {
    const double t = -length / 2.0 + length * i / (samples - 1);
    const double px = radius + t * c;
    const double py = radius - t * s;
    const int x0 = static_cast<int>(std::floor(px));
    const int y0 = static_cast<int>(std::floor(py));
    const double fx = px - x0;
    const double fy = py - y0;
    const double wts[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int j = 0; j < 4; ++j) {
      if (xs[j] < 0 || ys[j] < 0 || xs[j] >= side || ys[j] >= side) continue;
      k.weights[static_cast<std::size_t>(ys[j]) * side + xs[j]] += wts[j];
    }
  }
  const double total = k.sum();
  for (double& w : k.weights) w /= total;
  return k;
}

Kernel make_kernel(const BlurSpec& blur) {
  if (std::holds_alternative<DiracBlur>(blur)) return Kernel{};
  if (const auto* g = std::get_if<GaussianBlur>(&blur)) return gaussian_kernel(g->sigma);
  if (const auto* m = std::get_if<MotionBlur>(&blur)) return motion_kernel(m->length, m->angle);
  const auto& k = std::get<Kernel>(blur);
  validate_kernel(k);
  return k;
}

// ---------------------------------------------------------------------------
// Degradation steps

Image apply_blur(const Image& img, const Kernel& kernel) {
  require_valid(img, "apply_blur");
  validate_kernel(kernel);
  if (std::max(kernel.rows, kernel.cols) > 2 * std::min(img.height(), img.width())) {
    throw std::invalid_argument(fmt::format("apply_blur: {}x{} kernel too large for {}x{} image",
                                            kernel.rows, kernel.cols, img.height(), img.width()));
  }
  if (kernel.rows == 1 && kernel.cols == 1) return img;

  const int ry = kernel.rows / 2;
  const int rx = kernel.cols / 2;
  const int h = img.height();
  const int w = img.width();
  Image out(h, w);
  std::vector<int> col_index(static_cast<std::size_t>(w) * kernel.cols);
  for (int x = 0; x < w; ++x) {
    for (int j = 0; j < kernel.cols; ++j) col_index[static_cast<std::size_t>(x) * kernel.cols + j] = reflect_index(x + j - rx, w);
  }
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = 0; i < kernel.rows; ++i) {
          const int sy = reflect_index(y + i - ry, h);
          const int* cols = &col_index[static_cast<std::size_t>(x) * kernel.cols];
          for (int j = 0; j < kernel.cols; ++j) acc += kernel.at(i, j) * img.at(c, sy, cols[j]);
        }
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

Image apply_noise(const Image& img, const NoiseSpec& noise, Rng& rng) {
  require_valid(img, "apply_noise");
  Image out = img;
  if (const auto* g = std::get_if<GaussianNoise>(&noise)) {
    const double sigma = draw_in_range(g->sigma, g->sigma_max, rng);
    if (sigma == 0.0) return out;
    std::normal_distribution<double> normal(0.0, sigma);
    for (double& v : out.values()) v += normal(rng);
  } else if (const auto* p = std::get_if<PoissonNoise>(&noise)) {
    const double peak = draw_in_range(p->peak, p->peak_max, rng);
    if (!(peak > 0.0)) throw std::invalid_argument("apply_noise: poisson peak must be > 0");
    for (double& v : out.values()) {
      const double mean = std::clamp(v, 0.0, 1.0) * peak;
      if (mean <= 0.0) {
        v = 0.0;
        continue;
      }
      std::poisson_distribution<long long> poisson(mean);
      v = static_cast<double>(poisson(rng)) / peak;
    }
  }
  return out;
}

Image apply_shift(const Image& img, int dx, int dy) {
  require_valid(img, "apply_shift");
  if (std::abs(dx) >= img.width() || std::abs(dy) >= img.height()) {
    throw std::invalid_argument(fmt::format("apply_shift: ({}, {}) exceeds {}x{} image", dx, dy,
                                            img.height(), img.width()));
  }
  if (dx == 0 && dy == 0) return img;
  const int h = img.height();
  const int w = img.width();
  Image out(h, w);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < h; ++y) {
      const int sy = reflect_index(y - dy, h);
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, sy, reflect_index(x - dx, w));
    }
  }
  return out;
}

Image synthetic_lr(const Image& hr, int scale, ResampleFilter filter) {
  if (scale < 1) throw std::invalid_argument("synthetic_lr: scale must be >= 1");
  if (hr.height() % scale != 0 || hr.width() % scale != 0) {
    throw std::invalid_argument(fmt::format("{}x{} image is not divisible by scale {}", hr.height(),
                                            hr.width(), scale));
  }
  if (scale == 1) return hr;
  return resample(hr, 1.0 / scale, filter);
}

Image degrade(const Image& hr, const DegradationSpec& spec, Rng& rng) {
  require_valid(hr, "degrade");
  validate(spec);
  if (hr.height() % spec.scale != 0 || hr.width() % spec.scale != 0) {
    throw std::invalid_argument(fmt::format("degrade: {}x{} image is not divisible by scale {}",
                                            hr.height(), hr.width(), spec.scale));
  }

  Kernel kernel;
  if (const auto* g = std::get_if<GaussianBlur>(&spec.blur)) {
    kernel = gaussian_kernel(draw_in_range(g->sigma, g->sigma_max, rng));
  } else {
    kernel = make_kernel(spec.blur);
  }
  Image out = apply_blur(hr, kernel);
  out = synthetic_lr(out, spec.scale, spec.downsampler);

  Shift shift;
  if (const auto* f = std::get_if<FixedShift>(&spec.shift)) {
    shift = f->shift;
  } else {
    std::uniform_int_distribution<int> pick(0, std::get<RandomShift>(spec.shift).max_shift);
    shift.dx = pick(rng);
    shift.dy = pick(rng);
  }
  out = apply_shift(out, shift.dx, shift.dy);
  return apply_noise(out, spec.noise, rng);
}

// ---------------------------------------------------------------------------
// Procedural content

Image procedural_image(int height, int width, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x70726f63ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto color = [&] {
    return std::array<double, 3>{0.1 + 0.8 * unit(rng), 0.1 + 0.8 * unit(rng), 0.1 + 0.8 * unit(rng)};
  };

  Image img(height, width);
  const auto c0 = color();
  const auto c1 = color();
  const double theta = 2.0 * std::numbers::pi * unit(rng);
  const double gx = std::cos(theta);
  const double gy = std::sin(theta);
  const double diag = std::hypot(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = std::clamp(0.5 + ((x - width / 2.0) * gx + (y - height / 2.0) * gy) / diag, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1 - t) * c0[c] + t * c1[c];
    }
  }

  // Coverage of a shape given its signed distance (negative inside), with a
  // one-pixel linear ramp for anti-aliasing.
  auto blend = [&](double dist, const std::array<double, 3>& col, double opacity, int y, int x) {
    const double a = opacity * std::clamp(0.5 - dist, 0.0, 1.0);
    if (a <= 0.0) return;
    for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1 - a) * img.at(c, y, x) + a * col[c];
  };

  const int n_shapes = 4 + static_cast<int>(unit(rng) * 6);
  for (int s = 0; s < n_shapes; ++s) {
    const int kind = static_cast<int>(unit(rng) * 3);
    const auto col = color();
    const double cx = unit(rng) * width;
    const double cy = unit(rng) * height;
    const double size = (0.08 + 0.25 * unit(rng)) * std::min(height, width);
    const double opacity = 0.6 + 0.4 * unit(rng);
    const double rot = std::numbers::pi * unit(rng);
    const double cr = std::cos(rot);
    const double sr = std::sin(rot);
    const double aspect = 0.4 + 0.6 * unit(rng);
    const double period = 3.0 + 6.0 * unit(rng);
    const auto col2 = color();
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double px = x + 0.5 - cx;
        const double py = y + 0.5 - cy;
        const double u = px * cr + py * sr;
        const double v = -px * sr + py * cr;
        if (kind == 0) {
          blend(std::hypot(px, py) - size, col, opacity, y, x);
        } else if (kind == 1) {
          const double d = std::max(std::abs(u) - size, std::abs(v) - size * aspect);
          blend(d, col, opacity, y, x);
        } else {
          const double d = std::max(std::abs(u) - size, std::abs(v) - size);
          if (d > 0.5) continue;
          const double stripe = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u / period);
          std::array<double, 3> mixed{};
          for (int c = 0; c < 3; ++c) mixed[c] = stripe * col[c] + (1 - stripe) * col2[c];
          blend(d, mixed, opacity, y, x);
        }
      }
    }
  }
  return img;
}

}  // namespace cyclesr
