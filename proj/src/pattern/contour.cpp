#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "cutstudio/error.hpp"
#include "cutstudio/pattern_engine.hpp"

namespace cutstudio::pattern {

namespace {

struct IPoint {
  std::int64_t x, y;
};

// Crack directions in image coordinates (y down): E, S, W, N.
constexpr std::array<int, 4> kDx = {1, 0, -1, 0};
constexpr std::array<int, 4> kDy = {0, 1, 0, -1};

/// Closed corner sequences of every boundary, in integer mask coordinates.
std::vector<std::vector<IPoint>> trace_rings(const BinaryImage& mask) {
  const int w = mask.width(), h = mask.height();
  const int stride = w + 1;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(stride) * static_cast<std::size_t>(h + 1), 0);
  std::vector<std::uint8_t> used(out.size(), 0);
  auto vid = [stride](int x, int y) { return static_cast<std::size_t>(y) * static_cast<std::size_t>(stride) + static_cast<std::size_t>(x); };

  // Each pixel side facing outside becomes a directed edge with the mask on its right.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      if (!mask.get(x, y - 1)) out[vid(x, y)] |= 1;
      if (!mask.get(x + 1, y)) out[vid(x + 1, y)] |= 2;
      if (!mask.get(x, y + 1)) out[vid(x + 1, y + 1)] |= 4;
      if (!mask.get(x - 1, y)) out[vid(x, y + 1)] |= 8;
    }

  std::vector<std::vector<IPoint>> rings;
  for (int y = 0; y <= h; ++y)
    for (int x = 0; x <= w; ++x)
      for (int d0 = 0; d0 < 4; ++d0) {
        const std::size_t v0 = vid(x, y);
        if (!(out[v0] & (1 << d0)) || (used[v0] & (1 << d0))) continue;
        std::vector<IPoint> ring;
        int cx = x, cy = y, d = d0, prev = -1;
        do {
          used[vid(cx, cy)] |= static_cast<std::uint8_t>(1 << d);
          if (d != prev) ring.push_back({cx, cy});
          prev = d;
          cx += kDx[static_cast<std::size_t>(d)];
          cy += kDy[static_cast<std::size_t>(d)];
          // Right turn first: diagonal-only neighbours stay on separate boundaries.
          const std::uint8_t avail = out[vid(cx, cy)];
          int next = -1;
          for (int turn : {1, 0, 3})
            if (avail & (1 << ((d + turn) % 4))) {
              next = (d + turn) % 4;
              break;
            }
          if (next < 0) fail(ErrorCode::InvalidArgument, "broken boundary");
          d = next;
        } while (!(cx == x && cy == y && d == d0));
        // The start vertex is topmost-leftmost, so it is always a corner; the
        // last run may end collinear with the first.
        if (prev == d0 && ring.size() > 1) ring.erase(ring.begin());
        rings.push_back(std::move(ring));
      }
  return rings;
}

Ring to_ring(const std::vector<IPoint>& pts, const Point& origin) {
  Ring r;
  r.reserve(pts.size() + 1);
  for (const auto& p : pts) r.emplace_back(static_cast<double>(p.x) + origin.x(), static_cast<double>(p.y) + origin.y());
  r.push_back(r.front());
  return r;
}

double seg_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

/// True when no pixel center lies inside or on the loop formed by chain
/// pts[i..j] closed with the segment pts[j] -> pts[i].
bool chain_swap_is_clean(const std::vector<IPoint>& pts, std::size_t i, std::size_t j) {
  const std::size_t n = pts.size();
  auto at = [&](std::size_t k) -> const IPoint& { return pts[k % n]; };
  std::int64_t ymin = at(i).y, ymax = at(i).y;
  for (std::size_t k = i; k <= j; ++k) ymin = std::min(ymin, at(k).y), ymax = std::max(ymax, at(k).y);
  if (ymax == ymin) return true;
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(ymax - ymin));

  auto add_edge = [&](const IPoint& a, const IPoint& b) {
    if (a.y == b.y) return;
    const std::int64_t lo = std::min(a.y, b.y), hi = std::max(a.y, b.y);
    for (std::int64_t r = lo; r < hi; ++r) {
      // Crossing at y = r + 1/2, exact up to one rounding.
      const double num = static_cast<double>(2 * a.x * (b.y - a.y) + (2 * r + 1 - 2 * a.y) * (b.x - a.x));
      rows[static_cast<std::size_t>(r - ymin)].push_back(num / static_cast<double>(2 * (b.y - a.y)));
    }
  };
  for (std::size_t k = i; k < j; ++k) add_edge(at(k), at(k + 1));
  add_edge(at(j), at(i));

  for (auto& xs : rows) {
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2)
      // Any center c + 1/2 with xs[k] <= c + 1/2 <= xs[k+1]?
      if (std::ceil(xs[k] - 0.5) <= std::floor(xs[k + 1] - 0.5)) return false;
  }
  return true;
}

/// Douglas-Peucker over a closed integer ring; `guarded` rejects any shortcut
/// that would change the fill at a pixel center.
std::vector<IPoint> simplify_closed(const std::vector<IPoint>& pts, double tol, bool guarded) {
  const std::size_t n = pts.size();
  if (n < 4) return pts;
  auto pt = [&](std::size_t k) { return Point(static_cast<double>(pts[k % n].x), static_cast<double>(pts[k % n].y)); };

  std::size_t far = 0;
  double best = -1;
  for (std::size_t k = 1; k < n; ++k)
    if (double d = (pt(k) - pt(0)).squaredNorm(); d > best) best = d, far = k;

  std::vector<char> keep(n, 0);
  keep[0] = keep[far] = 1;
  std::vector<std::pair<std::size_t, std::size_t>> work = {{0, far}, {far, n}};
  while (!work.empty()) {
    auto [i, j] = work.back();
    work.pop_back();
    if (j - i < 2) continue;
    std::size_t split = i + 1;
    double dmax = -1;
    for (std::size_t k = i + 1; k < j; ++k)
      if (double d = seg_distance(pt(k), pt(i), pt(j)); d > dmax) dmax = d, split = k;
    if (dmax <= tol && (!guarded || chain_swap_is_clean(pts, i, j))) continue;
    keep[split % n] = 1;
    work.emplace_back(i, split);
    work.emplace_back(split, j);
  }
  std::vector<IPoint> out;
  for (std::size_t k = 0; k < n; ++k)
    if (keep[k]) out.push_back(pts[k]);
  if (out.size() < 3) return pts;
  return out;
}

}  // namespace

std::size_t VectorPath::vertex_count() const {
  std::size_t n = 0;
  for (const auto& r : subpaths) n += r.empty() ? 0 : r.size() - 1;
  return n;
}

VectorPath VectorPath::translated(const Point& offset) const {
  VectorPath out = *this;
  for (auto& r : out.subpaths)
    for (auto& p : r) p += offset;
  return out;
}

double signed_area(const Ring& ring) {
  double a = 0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i)
    a += ring[i].x() * ring[i + 1].y() - ring[i + 1].x() * ring[i].y();
  return a / 2;
}

VectorPath trace_boundaries(const BinaryImage& mask, const Point& origin) {
  VectorPath path;
  for (const auto& r : trace_rings(mask)) path.subpaths.push_back(to_ring(r, origin));
  return path;
}

namespace {

void require_connected(const BinaryImage& mask) {
  if (mask.empty_mask()) fail(ErrorCode::EmptyMask, "mask has no pixels");
  int n = 0;
  label_components(mask, true, 4, &n);
  if (n != 1) fail(ErrorCode::DisconnectedMask, "mask has " + std::to_string(n) + " 4-connected components");
}

Point bbox_origin(const CutoutMask& c) { return {static_cast<double>(c.bbox.x), static_cast<double>(c.bbox.y)}; }

}  // namespace

VectorPath trace_contour(const BinaryImage& mask, const Point& origin) {
  require_connected(mask);
  return trace_boundaries(mask, origin);
}

VectorPath trace_contour(const CutoutMask& cutout) { return trace_contour(cutout.mask(), bbox_origin(cutout)); }

Ring simplify_ring(const Ring& ring, double tolerance) {
  if (ring.size() < 5) return ring;
  // Plain DP on doubles, anchored at the first point and the farthest one.
  const std::size_t n = ring.size() - 1;
  std::size_t far = 0;
  double best = -1;
  for (std::size_t k = 1; k < n; ++k)
    if (double d = (ring[k] - ring[0]).squaredNorm(); d > best) best = d, far = k;
  std::vector<char> keep(n, 0);
  keep[0] = keep[far] = 1;
  std::vector<std::pair<std::size_t, std::size_t>> work = {{0, far}, {far, n}};
  auto pt = [&](std::size_t k) -> const Point& { return ring[k % n]; };
  while (!work.empty()) {
    auto [i, j] = work.back();
    work.pop_back();
    if (j - i < 2) continue;
    std::size_t split = i + 1;
    double dmax = -1;
    for (std::size_t k = i + 1; k < j; ++k)
      if (double d = seg_distance(pt(k), pt(i), pt(j)); d > dmax) dmax = d, split = k;
    if (dmax <= tolerance) continue;
    keep[split % n] = 1;
    work.emplace_back(i, split);
    work.emplace_back(split, j);
  }
  Ring out;
  for (std::size_t k = 0; k < n; ++k)
    if (keep[k]) out.push_back(ring[k]);
  if (out.size() < 3) return ring;
  out.push_back(out.front());
  return out;
}

VectorPath vectorize(const BinaryImage& mask, double tolerance, const Point& origin) {
  if (!(tolerance >= 0)) fail(ErrorCode::InvalidArgument, "tolerance must be non-negative");
  if (mask.empty_mask()) fail(ErrorCode::EmptyMask, "mask has no pixels");
  VectorPath path;
  for (const auto& r : trace_rings(mask)) path.subpaths.push_back(to_ring(simplify_closed(r, tolerance, true), origin));
  return path;
}

VectorPath vectorize(const CutoutMask& cutout, double tolerance) {
  return vectorize(cutout.mask(), tolerance, bbox_origin(cutout));
}

BinaryImage rasterize(const VectorPath& path, int width, int height, const Point& origin) {
  BinaryImage out(width, height);
  std::vector<double> xs;
  for (int row = 0; row < height; ++row) {
    const double yc = origin.y() + row + 0.5;
    xs.clear();
    for (const auto& ring : path.subpaths)
      for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Point& a = ring[i];
        const Point& b = ring[i + 1];
        if ((a.y() <= yc && yc < b.y()) || (b.y() <= yc && yc < a.y()))
          xs.push_back(a.x() + (yc - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
      }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k] - origin.x() - 0.5)));
      const int c1 = std::min(width, static_cast<int>(std::ceil(xs[k + 1] - origin.x() - 0.5)));
      for (int c = c0; c < c1; ++c) out.set(c, row, !out.at(c, row));
    }
  }
  return out;
}

}  // namespace cutstudio::pattern
