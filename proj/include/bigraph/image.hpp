#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace bigraph {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major H×W×C image (row 0 is the top of the picture).
template <class T>
class BasicImage {
 public:
  BasicImage() = default;
  BasicImage(int height, int width, int channels = 3, T fill = T{})
      : height_(height),
        width_(width),
        channels_(channels),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                  static_cast<std::size_t>(channels),
              fill) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int row, int col, int ch) { return data_[index(row, col, ch)]; }
  const T& at(int row, int col, int ch) const { return data_[index(row, col, ch)]; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(ch);
  }

  bool same_shape(const BasicImage& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 3;
  std::vector<T> data_;
};

using Image = BasicImage<double>;

/// 8-bit RGB PNG. Values are clamped to [0,1] and rounded to the nearest level.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Rounds every value to the nearest 8-bit level, as a PNG round trip would.
Image quantize_8bit(const Image& image);

/// Portable float image: "BIGI", u32 version, u32 H, u32 W, u32 C, f32 LE row-major.
inline constexpr std::uint32_t kBigiVersion = 1;
void write_bigi(const std::filesystem::path& path, const Image& image);
Image read_bigi(const std::filesystem::path& path);

/// Reads .png or .bigi by extension.
Image read_image(const std::filesystem::path& path);

/// Area-averaging resize (box filter over source pixels covering each target pixel).
Image resize(const Image& image, int height, int width);

/// Tiles images into one contact sheet with `columns` columns.
Image contact_sheet(const std::vector<Image>& images, int columns);

}  // namespace bigraph
