#include "cutstudio/image.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <png.h>

#include "cutstudio/error.hpp"

namespace cutstudio {

BinaryImage::BinaryImage(int width, int height, bool value) {
  if (width < 1 || height < 1) fail(ErrorCode::EmptyImage, "image dimensions must be positive");
  bits_ = Bits::Constant(height, width, value ? 1 : 0);
}

BinaryImage::BinaryImage(Bits bits) : bits_(std::move(bits)) {
  if (bits_.rows() < 1 || bits_.cols() < 1) fail(ErrorCode::EmptyImage, "image dimensions must be positive");
  bits_ = (bits_ != 0).cast<std::uint8_t>();
}

std::size_t BinaryImage::count() const { return static_cast<std::size_t>((bits_ != 0).count()); }

BBox BinaryImage::bbox() const {
  int x0 = width(), y0 = height(), x1 = -1, y1 = -1;
  for (int y = 0; y < height(); ++y)
    for (int x = 0; x < width(); ++x)
      if (at(x, y)) {
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        y0 = std::min(y0, y), y1 = std::max(y1, y);
      }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

BinaryImage BinaryImage::crop(const BBox& box) const {
  if (box.w < 1 || box.h < 1 || box.x < 0 || box.y < 0 || box.x + box.w > width() || box.y + box.h > height())
    fail(ErrorCode::InvalidArgument, "crop box outside image");
  return BinaryImage(Bits(bits_.block(box.y, box.x, box.h, box.w)));
}

BinaryImage BinaryImage::inverted() const { return BinaryImage(Bits((bits_ == 0).cast<std::uint8_t>())); }

namespace image_io {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

/// Netpbm header tokenizer (whitespace and '#' comments).
class PnmReader {
 public:
  explicit PnmReader(const std::string& b) : b_(b) {}

  int next_int() {
    skip();
    if (pos_ >= b_.size() || !std::isdigit(static_cast<unsigned char>(b_[pos_])))
      fail(ErrorCode::SchemaError, "malformed netpbm header");
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > 1 << 20) fail(ErrorCode::SchemaError, "netpbm value too large");
    }
    return static_cast<int>(v);
  }
  /// Single whitespace byte separates header from raster.
  void end_header() { ++pos_; }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void skip() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }
  const std::string& b_;
  std::size_t pos_ = 2;
};

GrayImage decode_pnm(const std::string& b) {
  const char kind = b[1];
  PnmReader r(b);
  const int w = r.next_int(), h = r.next_int();
  if (w < 1 || h < 1) fail(ErrorCode::EmptyImage, "empty netpbm image");
  const bool bitmap = kind == '1' || kind == '4';
  const int maxval = bitmap ? 1 : r.next_int();
  if (maxval < 1 || maxval > 65535) fail(ErrorCode::SchemaError, "bad netpbm maxval");
  const bool color = kind == '3' || kind == '6';
  const bool ascii = kind == '1' || kind == '2' || kind == '3';
  GrayImage img(h, w);

  auto scale = [maxval](int v) { return static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval); };
  auto gray = [](int r_, int g, int b_) { return static_cast<std::uint8_t>((299 * r_ + 587 * g + 114 * b_ + 500) / 1000); };

  if (ascii) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (bitmap) {
          img(y, x) = r.next_int() ? 0 : 255;
        } else if (color) {
          const int rr = r.next_int(), gg = r.next_int(), bb = r.next_int();
          img(y, x) = gray(scale(rr), scale(gg), scale(bb));
        } else {
          img(y, x) = scale(r.next_int());
        }
      }
    return img;
  }

  r.end_header();
  std::size_t p = r.pos();
  const int bytes_per_sample = maxval > 255 ? 2 : 1;
  auto sample = [&]() -> int {
    if (p + static_cast<std::size_t>(bytes_per_sample) > b.size()) fail(ErrorCode::SchemaError, "truncated netpbm raster");
    int v = static_cast<unsigned char>(b[p++]);
    if (bytes_per_sample == 2) v = (v << 8) | static_cast<unsigned char>(b[p++]);
    return v;
  };
  if (bitmap) {
    const std::size_t row_bytes = static_cast<std::size_t>((w + 7) / 8);
    if (p + row_bytes * static_cast<std::size_t>(h) > b.size()) fail(ErrorCode::SchemaError, "truncated PBM raster");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto byte = static_cast<unsigned char>(b[p + static_cast<std::size_t>(y) * row_bytes + static_cast<std::size_t>(x / 8)]);
        img(y, x) = ((byte >> (7 - x % 8)) & 1) ? 0 : 255;
      }
    return img;
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (color) {
        const int rr = sample(), gg = sample(), bb = sample();
        img(y, x) = gray(scale(rr), scale(gg), scale(bb));
      } else {
        img(y, x) = scale(sample());
      }
    }
  return img;
}

GrayImage decode_png(const std::string& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    fail(ErrorCode::SchemaError, std::string("PNG: ") + image.message);
  image.format = PNG_FORMAT_GRAY;
  GrayImage img(static_cast<Eigen::Index>(image.height), static_cast<Eigen::Index>(image.width));
  if (!png_image_finish_read(&image, nullptr, img.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorCode::SchemaError, std::string("PNG: ") + image.message);
  }
  return img;
}

}  // namespace

GrayImage decode_gray(const std::string& bytes) {
  if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes.compare(1, 3, "PNG") == 0)
    return decode_png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 'P' && bytes[1] >= '1' && bytes[1] <= '6') return decode_pnm(bytes);
  fail(ErrorCode::UnsupportedFeature, "unrecognized image format");
}

GrayImage read_gray(const std::filesystem::path& path) { return decode_gray(slurp(path)); }

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data()), static_cast<std::size_t>(img.size()));
  return out;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) { spit(path, encode_pgm(img)); }

std::string encode_pbm(const BinaryImage& img) {
  const int w = img.width(), h = img.height();
  std::string out = "P4\n" + std::to_string(w) + " " + std::to_string(h) + "\n";
  const std::size_t row_bytes = static_cast<std::size_t>((w + 7) / 8);
  std::string raster(row_bytes * static_cast<std::size_t>(h), '\0');
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (img.at(x, y))
        raster[static_cast<std::size_t>(y) * row_bytes + static_cast<std::size_t>(x / 8)] |=
            static_cast<char>(1 << (7 - x % 8));
  return out + raster;
}

void write_pbm(const BinaryImage& img, const std::filesystem::path& path) { spit(path, encode_pbm(img)); }

BinaryImage decode_pbm(const std::string& bytes) {
  if (bytes.size() < 3 || bytes[0] != 'P' || (bytes[1] != '4' && bytes[1] != '1'))
    fail(ErrorCode::SchemaError, "not a PBM bitmap");
  const GrayImage g = decode_pnm(bytes);
  return BinaryImage(BinaryImage::Bits((g == 0).cast<std::uint8_t>()));
}

GrayImage to_gray(const BinaryImage& mask) {
  return GrayImage((mask.bits() != 0).select(GrayImage::Constant(mask.height(), mask.width(), 0),
                                             GrayImage::Constant(mask.height(), mask.width(), 255)));
}

}  // namespace image_io

}  // namespace cutstudio
