#include "cyclesr/imagecore.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include <fmt/format.h>

namespace cyclesr {

Image::Image(int height, int width, double fill) : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument(fmt::format("image dimensions must be positive, got {}x{}", height, width));
  }
  data_.assign(static_cast<std::size_t>(kChannels) * height * width, fill);
}

Image Image::crop(int top, int left, int height, int width) const {
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > height_ ||
      left + width > width_) {
    throw std::out_of_range(fmt::format("crop ({},{}) {}x{} outside {}x{} image", top, left,
                                        height, width, height_, width_));
  }
  Image out(height, width);
  for (int c = 0; c < kChannels; ++c) {
    for (int y = 0; y < height; ++y) {
      const double* src = &data_[index(c, top + y, left)];
      std::copy(src, src + width, &out.at(c, y, 0));
    }
  }
  return out;
}

void require_valid(const Image& img, const char* what) {
  if (img.empty()) throw std::invalid_argument(fmt::format("{}: empty image", what));
  for (double v : img.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument(fmt::format("{}: non-finite pixel", what));
  }
}

unsigned char quantize_u8(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct DecodedPng {
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  std::size_t row_bytes = 0;
};

// All state touched after setjmp lives behind `out`, so a longjmp leaves no
// indeterminate locals in this frame.
bool decode_png(std::FILE* file, DecodedPng* out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }

  png_init_io(png, file);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->bit_depth = png_get_bit_depth(png, info);
  out->row_bytes = png_get_rowbytes(png, info);
  out->pixels.resize(out->row_bytes * out->height);
  out->rows.resize(out->height);
  for (png_uint_32 y = 0; y < out->height; ++y) {
    out->rows[y] = out->pixels.data() + y * out->row_bytes;
  }
  png_read_image(png, out->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode_png(std::FILE* file, int width, int height, png_bytep* rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw LoadError(fmt::format("cannot open image '{}'", path.string()));

  unsigned char signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw LoadError(fmt::format("'{}' is not a PNG file", path.string()));
  }

  DecodedPng png;
  if (!decode_png(file.get(), &png)) {
    throw LoadError(fmt::format("corrupt or unsupported PNG '{}'", path.string()));
  }
  const int bytes_per_sample = png.bit_depth == 16 ? 2 : 1;
  if ((png.bit_depth != 8 && png.bit_depth != 16) ||
      png.row_bytes != static_cast<std::size_t>(png.width) * 3 * bytes_per_sample) {
    throw LoadError(fmt::format("'{}' did not decode to 8/16-bit RGB", path.string()));
  }

  const int h = static_cast<int>(png.height);
  const int w = static_cast<int>(png.width);
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    const unsigned char* row = png.rows[y];
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        if (bytes_per_sample == 2) {
          const unsigned char* p = row + (x * 3 + c) * 2;
          img.at(c, y, x) = static_cast<double>((p[0] << 8) | p[1]) / 65535.0;
        } else {
          img.at(c, y, x) = row[x * 3 + c] / 255.0;
        }
      }
    }
  }
  return img;
}

void save_image(const Image& img, const std::filesystem::path& path) {
  require_valid(img, "save_image");
  const int h = img.height();
  const int w = img.width();
  std::vector<unsigned char> pixels(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] = quantize_u8(img.at(c, y, x));
      }
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w * 3;

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError(fmt::format("cannot write image '{}'", path.string()));
  if (!encode_png(file.get(), w, h, rows.data()) || std::fflush(file.get()) != 0) {
    throw IoError(fmt::format("failed writing PNG '{}'", path.string()));
  }
}

ChannelStats channel_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("channel_stats: empty channel");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

Image normalize_to_reference(const Image& img, const Image& ref) {
  require_valid(img, "normalize_to_reference");
  require_valid(ref, "normalize_to_reference");
  constexpr double kEps = 1e-8;
  Image out = img;
  for (int c = 0; c < Image::kChannels; ++c) {
    const ChannelStats r = channel_stats(ref.channel(c));
    const ChannelStats s = channel_stats(img.channel(c));
    if (r.stddev <= kEps) {
      throw std::invalid_argument(fmt::format("normalize_to_reference: reference channel {} is constant", c));
    }
    if (s.stddev <= kEps) {
      throw std::invalid_argument(fmt::format("normalize_to_reference: input channel {} is constant", c));
    }
    const double gain = r.stddev / s.stddev;
    const double offset = r.mean - gain * s.mean;
    for (double& v : out.channel(c)) v = v * gain + offset;
  }
  return out;
}

}  // namespace cyclesr
