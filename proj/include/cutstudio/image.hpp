#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cutstudio {

/// 8-bit grayscale raster; rows are scanlines (height x width).
using GrayImage = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Pixel {
  int x = 0;
  int y = 0;

  /// Raster order: row first.
  friend auto operator<=>(const Pixel& a, const Pixel& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool contains(int px, int py) const { return px >= x && py >= y && px < x + w && py < y + h; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Foreground mask: true marks paper (or, for a mask, pixels in the mask).
class BinaryImage {
 public:
  using Bits = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BinaryImage(int width, int height, bool value = false);
  explicit BinaryImage(Bits bits);

  int width() const { return static_cast<int>(bits_.cols()); }
  int height() const { return static_cast<int>(bits_.rows()); }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width() && y < height(); }

  bool at(int x, int y) const { return bits_(y, x) != 0; }
  /// Out-of-bounds reads are false.
  bool get(int x, int y) const { return in_bounds(x, y) && at(x, y); }
  void set(int x, int y, bool v = true) { bits_(y, x) = v ? 1 : 0; }

  std::size_t count() const;
  bool empty_mask() const { return count() == 0; }
  /// Tight bounding box of set pixels; zero-size when nothing is set.
  BBox bbox() const;
  BinaryImage crop(const BBox& box) const;
  BinaryImage inverted() const;

  const Bits& bits() const { return bits_; }
  Bits& bits() { return bits_; }

  friend bool operator==(const BinaryImage& a, const BinaryImage& b) {
    return a.bits_.rows() == b.bits_.rows() && a.bits_.cols() == b.bits_.cols() && (a.bits_ == b.bits_).all();
  }

 private:
  Bits bits_;
};

namespace image_io {

/// Reads PGM/PPM/PBM (ascii or binary) and PNG, converting to 8-bit gray.
GrayImage read_gray(const std::filesystem::path& path);
GrayImage decode_gray(const std::string& bytes);

void write_pgm(const GrayImage& img, const std::filesystem::path& path);
std::string encode_pgm(const GrayImage& img);

/// 1-bit raw PBM (P4). Set pixels are written as 1 (black).
std::string encode_pbm(const BinaryImage& img);
void write_pbm(const BinaryImage& img, const std::filesystem::path& path);
BinaryImage decode_pbm(const std::string& bytes);

/// Renders a mask as gray: set pixels black (0), others white (255).
GrayImage to_gray(const BinaryImage& mask);

}  // namespace image_io

}  // namespace cutstudio
