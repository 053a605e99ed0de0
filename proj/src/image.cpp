#include "bigraph/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "bigraph/binary_io.hpp"

namespace bigraph {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("libpng: ") + msg); }

void png_warn(png_structp, png_const_charp) {}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 3) throw IoError("write_png: only 3-channel images are supported");
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed settings keep the encoded bytes reproducible.
  png_set_compression_level(png, 6);
  png_write_info(png, info);

  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width()) * 3);
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      for (int ch = 0; ch < 3; ++ch) row[static_cast<std::size_t>(c * 3 + ch)] = to_byte(image.at(r, c, ch));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw IoError("cannot open for reading: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image image(height, width, 3);
  std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
  for (int r = 0; r < height; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (int c = 0; c < width; ++c) {
      for (int ch = 0; ch < 3; ++ch) image.at(r, c, ch) = row[static_cast<std::size_t>(c * 3 + ch)] / 255.0;
    }
  }
  png_read_end(png, nullptr);
  return image;
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (double& v : out.data()) v = to_byte(v) / 255.0;
  return out;
}

void write_bigi(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  binary::write_magic(os, "BIGI");
  binary::write<std::uint32_t>(os, kBigiVersion);
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(image.height()));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(image.width()));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(image.channels()));
  for (double v : image.data()) binary::write<float>(os, static_cast<float>(v));
  if (!os) throw IoError("write failed: " + path.string());
}

Image read_bigi(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  binary::expect_magic(is, "BIGI");
  const auto version = binary::read<std::uint32_t>(is);
  if (version != kBigiVersion) throw IoError("unsupported BIGI version " + std::to_string(version));
  const auto h = binary::read<std::uint32_t>(is);
  const auto w = binary::read<std::uint32_t>(is);
  const auto c = binary::read<std::uint32_t>(is);
  Image image(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (double& v : image.data()) v = binary::read<float>(is);
  return image;
}

Image read_image(const std::filesystem::path& path) {
  if (path.extension() == ".bigi") return read_bigi(path);
  return read_png(path);
}

Image resize(const Image& image, int height, int width) {
  if (image.height() == height && image.width() == width) return image;
  Image out(height, width, image.channels());
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int r = 0; r < height; ++r) {
    const double y0 = r * sy;
    const double y1 = (r + 1) * sy;
    for (int c = 0; c < width; ++c) {
      const double x0 = c * sx;
      const double x1 = (c + 1) * sx;
      std::vector<double> acc(static_cast<std::size_t>(image.channels()), 0.0);
      double area = 0.0;
      for (int yy = static_cast<int>(std::floor(y0)); yy < std::min(image.height(), static_cast<int>(std::ceil(y1)));
           ++yy) {
        const double wy = std::min<double>(yy + 1, y1) - std::max<double>(yy, y0);
        if (wy <= 0.0) continue;
        for (int xx = static_cast<int>(std::floor(x0));
             xx < std::min(image.width(), static_cast<int>(std::ceil(x1))); ++xx) {
          const double wx = std::min<double>(xx + 1, x1) - std::max<double>(xx, x0);
          if (wx <= 0.0) continue;
          for (int ch = 0; ch < image.channels(); ++ch) acc[static_cast<std::size_t>(ch)] += wx * wy * image.at(yy, xx, ch);
          area += wx * wy;
        }
      }
      for (int ch = 0; ch < image.channels(); ++ch) out.at(r, c, ch) = acc[static_cast<std::size_t>(ch)] / area;
    }
  }
  return out;
}

Image contact_sheet(const std::vector<Image>& images, int columns) {
  if (images.empty()) return {};
  const int h = images.front().height();
  const int w = images.front().width();
  const int n = static_cast<int>(images.size());
  const int rows = (n + columns - 1) / columns;
  Image sheet(rows * h, std::min(n, columns) * w, 3, 1.0);
  for (int i = 0; i < n; ++i) {
    const Image& img = images[static_cast<std::size_t>(i)];
    const int r0 = (i / columns) * h;
    const int c0 = (i % columns) * w;
    for (int r = 0; r < std::min(h, img.height()); ++r)
      for (int c = 0; c < std::min(w, img.width()); ++c)
        for (int ch = 0; ch < 3; ++ch) sheet.at(r0 + r, c0 + c, ch) = img.at(r, c, ch);
  }
  return sheet;
}

}  // namespace bigraph
