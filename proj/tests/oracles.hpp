#pragma once
// Independent reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cutstudio/image.hpp"
#include "cutstudio/pattern_engine.hpp"

namespace oracle {

using cutstudio::BinaryImage;
using cutstudio::GrayImage;

/// Enclosed background regions by breadth-first flood fill: everything the
/// border can reach through 4-neighbour background steps is outside.
inline std::vector<std::vector<std::pair<int, int>>> enclosed_regions(const BinaryImage& paper,
                                                                       std::size_t min_area) {
  const int w = paper.width(), h = paper.height();
  std::vector<int> seen(static_cast<std::size_t>(w * h), 0);
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y * w + x); };
  std::deque<std::pair<int, int>> q;
  auto push = [&](int x, int y, int mark) {
    if (x < 0 || y < 0 || x >= w || y >= h || paper.at(x, y) || seen[idx(x, y)]) return;
    seen[idx(x, y)] = mark;
    q.emplace_back(x, y);
  };
  auto drain = [&](int mark, std::vector<std::pair<int, int>>* collect) {
    while (!q.empty()) {
      auto [x, y] = q.front();
      q.pop_front();
      if (collect) collect->emplace_back(x, y);
      push(x + 1, y, mark), push(x - 1, y, mark), push(x, y + 1, mark), push(x, y - 1, mark);
    }
  };
  for (int x = 0; x < w; ++x) push(x, 0, -1), push(x, h - 1, -1);
  for (int y = 0; y < h; ++y) push(0, y, -1), push(w - 1, y, -1);
  drain(-1, nullptr);

  std::vector<std::vector<std::pair<int, int>>> regions;
  int mark = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (paper.at(x, y) || seen[idx(x, y)]) continue;
      std::vector<std::pair<int, int>> region;
      push(x, y, ++mark);
      drain(mark, &region);
      if (region.size() >= min_area) regions.push_back(std::move(region));
    }
  return regions;
}

inline std::vector<std::size_t> enclosed_areas(const BinaryImage& paper, std::size_t min_area) {
  std::vector<std::size_t> areas;
  for (const auto& r : enclosed_regions(paper, min_area)) areas.push_back(r.size());
  std::sort(areas.begin(), areas.end());
  return areas;
}

/// Even-odd point-in-polygon by ray crossing, evaluated at every pixel center.
inline BinaryImage rasterize(const cutstudio::pattern::VectorPath& path, int w, int h, double ox = 0,
                             double oy = 0) {
  BinaryImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double px = ox + x + 0.5, py = oy + y + 0.5;
      bool inside = false;
      for (const auto& ring : path.subpaths)
        for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
          const double xi = ring[i].x(), yi = ring[i].y(), xj = ring[j].x(), yj = ring[j].y();
          if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) inside = !inside;
        }
      out.set(x, y, inside);
    }
  return out;
}

inline std::size_t mismatches(const BinaryImage& a, const BinaryImage& b) {
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) n += a.at(x, y) != b.at(x, y);
  return n;
}

/// Exhaustive Otsu: thresholds minimizing within-class variance. Returns the
/// first and last minimizer.
inline std::pair<int, int> otsu_minimizers(const GrayImage& img) {
  std::vector<double> values(img.data(), img.data() + img.size());
  double best = INFINITY;
  int first = -1, last = -1;
  for (int t = 0; t < 255; ++t) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0, q0 = 0, q1 = 0;
    for (double v : values)
      if (v <= t) n0 += 1, s0 += v, q0 += v * v;
      else n1 += 1, s1 += v, q1 += v * v;
    if (n0 == 0 || n1 == 0) continue;
    const double within = (q0 - s0 * s0 / n0) + (q1 - s1 * s1 / n1);
    if (within < best - 1e-9 * std::max(1.0, best)) best = within, first = last = t;
    else if (std::abs(within - best) <= 1e-9 * std::max(1.0, best)) last = t;
  }
  return {first, last};
}

/// Ranking by full sort: score descending, id ascending.
inline std::vector<std::pair<std::string, double>> brute_force_rank(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries, const Eigen::VectorXd& query,
    std::size_t k) {
  auto unit = [](const Eigen::VectorXd& v) {
    double n = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) n += v[i] * v[i];
    return Eigen::VectorXd(v / std::sqrt(n));
  };
  const Eigen::VectorXd q = unit(query);
  std::vector<std::pair<std::string, double>> all;
  for (const auto& [id, v] : entries) {
    const Eigen::VectorXd u = unit(v);
    double s = 0;
    for (Eigen::Index i = 0; i < u.size(); ++i) s += u[i] * q[i];
    all.emplace_back(id, std::clamp(s, -1.0, 1.0));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

/// Relative closeness with a tiny absolute floor for values that are zero up
/// to rounding.
inline bool rel_close(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

}  // namespace oracle
