#include <algorithm>
#include <array>
#include <cstdint>
#include <set>

#include "cutstudio/error.hpp"
#include "cutstudio/pattern_engine.hpp"

namespace cutstudio::pattern {

int otsu_threshold(const GrayImage& img) {
  if (img.size() == 0) fail(ErrorCode::EmptyImage, "empty image");
  std::array<std::int64_t, 256> hist{};
  for (Eigen::Index i = 0; i < img.size(); ++i) ++hist[img.data()[i]];
  const std::int64_t n = img.size();
  std::int64_t total_sum = 0;
  for (int v = 0; v < 256; ++v) total_sum += v * hist[v];

  std::int64_t w0 = 0, s0 = 0;
  double best = -1;
  int first = -1, last = -1;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    s0 += t * hist[t];
    const std::int64_t w1 = n - w0, s1 = total_sum - s0;
    if (w0 == 0 || w1 == 0) continue;
    // Between-class variance times n^2: (w1*s0 - w0*s1)^2 / (w0*w1).
    const double d = static_cast<double>(w1 * s0 - w0 * s1);
    const double var = d * d / (static_cast<double>(w0) * static_cast<double>(w1));
    if (var > best) {
      best = var;
      first = last = t;
    } else if (var == best) {
      last = t;
    }
  }
  if (first < 0) return -1;  // uniform
  return (first + last) / 2;
}

BinaryImage binarize(const GrayImage& img, BinarizeOptions opts) {
  if (img.rows() < 1 || img.cols() < 1) fail(ErrorCode::EmptyImage, "empty image");
  const int t = otsu_threshold(img);
  BinaryImage::Bits bits;
  if (t < 0)
    bits = BinaryImage::Bits::Constant(img.rows(), img.cols(), img(0, 0) < 128 ? 1 : 0);
  else
    bits = (img <= static_cast<std::uint8_t>(t)).cast<std::uint8_t>();
  if (opts.invert) bits = (bits == 0).cast<std::uint8_t>();
  return BinaryImage(std::move(bits));
}

LabelImage label_components(const BinaryImage& img, bool value, int connectivity, int* count) {
  if (connectivity != 4 && connectivity != 8) fail(ErrorCode::InvalidArgument, "connectivity must be 4 or 8");
  const int w = img.width(), h = img.height();
  LabelImage labels = LabelImage::Zero(h, w);
  std::vector<Pixel> stack;
  int next = 0;
  static constexpr int dx[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int dy[] = {0, 0, 1, -1, 1, -1, 1, -1};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (img.at(x, y) != value || labels(y, x)) continue;
      labels(y, x) = ++next;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int k = 0; k < connectivity; ++k) {
          const int nx = p.x + dx[k], ny = p.y + dy[k];
          if (!img.in_bounds(nx, ny) || img.at(nx, ny) != value || labels(ny, nx)) continue;
          labels(ny, nx) = next;
          stack.push_back({nx, ny});
        }
      }
    }
  if (count) *count = next;
  return labels;
}

BinaryImage CutoutMask::mask() const {
  BinaryImage m(bbox.w, bbox.h);
  for (const auto& p : pixels) m.set(p.x - bbox.x, p.y - bbox.y);
  return m;
}

std::vector<CutoutMask> extract_cutouts(const BinaryImage& foreground, std::size_t min_area,
                                        const std::string& id_prefix) {
  const int w = foreground.width(), h = foreground.height();
  int n_bg = 0;
  const LabelImage bg = label_components(foreground, false, 4, &n_bg);
  const LabelImage fg = label_components(foreground, true, 8);

  std::vector<char> touches(static_cast<std::size_t>(n_bg) + 1, 0);
  for (int x = 0; x < w; ++x) touches[static_cast<std::size_t>(bg(0, x))] = touches[static_cast<std::size_t>(bg(h - 1, x))] = 1;
  for (int y = 0; y < h; ++y) touches[static_cast<std::size_t>(bg(y, 0))] = touches[static_cast<std::size_t>(bg(y, w - 1))] = 1;

  std::vector<CutoutMask> holes(static_cast<std::size_t>(n_bg) + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l = bg(y, x);
      if (l && !touches[static_cast<std::size_t>(l)]) holes[static_cast<std::size_t>(l)].pixels.push_back({x, y});
    }

  std::vector<CutoutMask> out;
  for (int l = 1; l <= n_bg; ++l) {
    auto& c = holes[static_cast<std::size_t>(l)];
    if (touches[static_cast<std::size_t>(l)] || c.pixels.size() < min_area) continue;
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    for (const auto& p : c.pixels) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    c.bbox = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
    c.area = c.pixels.size();
    // The pixel above the raster-first hole pixel is paper, inside the border.
    const Pixel first = c.pixels.front();
    c.parent_component = fg(first.y - 1, first.x);
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const CutoutMask& a, const CutoutMask& b) {
    if (a.bbox.y != b.bbox.y) return a.bbox.y < b.bbox.y;
    return a.bbox.x < b.bbox.x;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].cutout_id = id_prefix + std::to_string(i + 1);
  return out;
}

BinaryImage segment_by_points(const BinaryImage& foreground, const std::vector<Pixel>& fg,
                              const std::vector<Pixel>& bg) {
  if (fg.empty()) fail(ErrorCode::EmptyResult, "no foreground points given");
  for (const auto* points : {&fg, &bg})
    for (const auto& p : *points)
      if (!foreground.in_bounds(p.x, p.y))
        fail(ErrorCode::InvalidArgument, "point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") outside image");

  const LabelImage labels = label_components(foreground, true, 8);
  std::set<int> keep;
  for (const auto& p : fg) {
    if (!foreground.at(p.x, p.y))
      fail(ErrorCode::PointOnOppositeClass,
           "foreground point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") is on background");
    keep.insert(labels(p.y, p.x));
  }
  for (const auto& p : bg)
    if (foreground.at(p.x, p.y) && keep.count(labels(p.y, p.x)))
      fail(ErrorCode::PointOnOppositeClass,
           "background point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") lies in a selected region");

  BinaryImage out(foreground.width(), foreground.height());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      if (labels(y, x) && keep.count(labels(y, x))) out.set(x, y);
  return out;
}

}  // namespace cutstudio::pattern
