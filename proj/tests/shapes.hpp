#pragma once
// Procedural masks and gray images shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cutstudio/image.hpp"

namespace shapes {

using cutstudio::BinaryImage;
using cutstudio::GrayImage;

inline BinaryImage disk(int w, int h, double cx, double cy, double r) {
  BinaryImage m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy) <= r * r) m.set(x, y);
  return m;
}

inline void fill_rect(BinaryImage& m, int x0, int y0, int w, int h, bool v = true) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) m.set(x, y, v);
}

inline BinaryImage rect(int w, int h, int x0, int y0, int rw, int rh) {
  BinaryImage m(w, h);
  fill_rect(m, x0, y0, rw, rh);
  return m;
}

/// Filled triangle with pixel centers tested against three half-planes.
inline BinaryImage triangle(int w, int h, double ax, double ay, double bx, double by, double cx, double cy) {
  BinaryImage m(w, h);
  auto side = [](double px, double py, double x0, double y0, double x1, double y1) {
    return (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0);
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double s0 = side(px, py, ax, ay, bx, by), s1 = side(px, py, bx, by, cx, cy), s2 = side(px, py, cx, cy, ax, ay);
      if ((s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0)) m.set(x, y);
    }
  return m;
}

inline BinaryImage crescent(int w, int h, double cx, double cy, double r) {
  BinaryImage outer = disk(w, h, cx, cy, r);
  const BinaryImage bite = disk(w, h, cx + 0.45 * r, cy - 0.2 * r, 0.8 * r);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (bite.at(x, y)) outer.set(x, y, false);
  return outer;
}

/// Horizontal band with `teeth` triangular teeth on top.
inline BinaryImage teeth_strip(int teeth, int tooth_w = 8, int tooth_h = 8, int band_h = 6, int margin = 3) {
  const int w = teeth * tooth_w + 2 * margin, h = tooth_h + band_h + 2 * margin;
  BinaryImage m(w, h);
  fill_rect(m, margin, margin + tooth_h, teeth * tooth_w, band_h);
  for (int t = 0; t < teeth; ++t)
    for (int y = 0; y < tooth_h; ++y)
      for (int x = 0; x < tooth_w; ++x) {
        // Triangle wave: apex at the tooth center, base on the band.
        const double u = std::abs((x + 0.5) - tooth_w / 2.0) / (tooth_w / 2.0);
        const double height_here = (1.0 - u) * tooth_h;
        if (tooth_h - (y + 0.5) <= height_here) m.set(margin + t * tooth_w + x, margin + y);
      }
  return m;
}

inline BinaryImage upscale2(const BinaryImage& m) {
  BinaryImage out(2 * m.width(), 2 * m.height());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.set(x, y, m.at(x / 2, y / 2));
  return out;
}

/// 90 degree rotation (clockwise on screen).
inline BinaryImage rotate90(const BinaryImage& m) {
  BinaryImage out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) out.set(m.height() - 1 - y, x, m.at(x, y));
  return out;
}

inline BinaryImage shifted(const BinaryImage& m, int dx, int dy, int w, int h) {
  BinaryImage out(w, h);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) out.set(x + dx, y + dy);
  return out;
}

/// Paper (dark, 30) where `paper` is set, light background (225) elsewhere.
inline GrayImage render(const BinaryImage& paper, std::uint8_t ink = 30, std::uint8_t bg = 225) {
  GrayImage g(paper.height(), paper.width());
  for (int y = 0; y < paper.height(); ++y)
    for (int x = 0; x < paper.width(); ++x) g(y, x) = paper.at(x, y) ? ink : bg;
  return g;
}

struct Fixture {
  std::string name;
  GrayImage image;
};

/// The ten synthetic paper-cut images: solid paper with enclosed cut-outs of
/// assorted shapes, including corner cases for connectivity and min_area.
inline std::vector<Fixture> synthetic_suite() {
  std::vector<Fixture> out;
  auto carve = [](BinaryImage& paper, const BinaryImage& hole) {
    for (int y = 0; y < paper.height(); ++y)
      for (int x = 0; x < paper.width(); ++x)
        if (hole.at(x, y)) paper.set(x, y, false);
  };

  {  // 1: ring
    BinaryImage p = disk(96, 96, 48, 48, 40);
    carve(p, disk(96, 96, 48, 48, 22));
    out.push_back({"ring", render(p)});
  }
  {  // 2: five shaped holes in a disk
    BinaryImage p = disk(128, 128, 64, 64, 60);
    carve(p, disk(128, 128, 40, 40, 10));
    carve(p, rect(128, 128, 75, 30, 18, 18));
    carve(p, triangle(128, 128, 30, 95, 55, 95, 42, 70));
    carve(p, crescent(128, 128, 88, 85, 14));
    carve(p, rect(128, 128, 58, 58, 12, 12));
    out.push_back({"five_holes", render(p)});
  }
  {  // 3: grid of small square holes
    BinaryImage p = rect(100, 100, 5, 5, 90, 90);
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 6; ++i) fill_rect(p, 12 + 13 * i, 12 + 13 * j, 6, 6, false);
    out.push_back({"grid", render(p)});
  }
  {  // 4: nested: hole containing an island containing a hole
    BinaryImage p = rect(90, 90, 4, 4, 82, 82);
    fill_rect(p, 20, 20, 50, 50, false);
    fill_rect(p, 30, 30, 30, 30, true);
    fill_rect(p, 40, 40, 10, 10, false);
    out.push_back({"nested", render(p)});
  }
  {  // 5: notches open to the border are not cut-outs
    BinaryImage p(80, 60, true);
    fill_rect(p, 0, 20, 15, 8, false);
    fill_rect(p, 60, 0, 8, 12, false);
    fill_rect(p, 30, 25, 10, 10, false);
    out.push_back({"border_notches", render(p)});
  }
  {  // 6: background pixels touching only diagonally stay separate
    BinaryImage p = rect(40, 40, 2, 2, 36, 36);
    fill_rect(p, 10, 10, 4, 4, false);
    fill_rect(p, 14, 14, 4, 4, false);
    fill_rect(p, 24, 8, 1, 1, false);
    fill_rect(p, 25, 9, 1, 1, false);
    out.push_back({"diagonal_holes", render(p)});
  }
  {  // 7: holes below and at min_area
    BinaryImage p = rect(50, 30, 1, 1, 48, 28);
    fill_rect(p, 5, 5, 1, 1, false);    // 1 px
    fill_rect(p, 10, 5, 3, 1, false);   // 3 px
    fill_rect(p, 20, 5, 2, 2, false);   // 4 px
    fill_rect(p, 30, 5, 5, 1, false);   // 5 px
    out.push_back({"tiny_holes", render(p)});
  }
  {  // 8: sawtooth-edged hole
    BinaryImage p = rect(110, 50, 2, 2, 106, 46);
    const BinaryImage t = teeth_strip(10, 9, 9, 8, 0);
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x)
        if (t.at(x, y)) p.set(x + 10, y + 12, false);
    out.push_back({"teeth_hole", render(p)});
  }
  {  // 9: two separate paper pieces, each with holes
    BinaryImage p = disk(120, 70, 32, 35, 28);
    const BinaryImage q = rect(120, 70, 70, 10, 45, 50);
    for (int y = 0; y < 70; ++y)
      for (int x = 0; x < 120; ++x)
        if (q.at(x, y)) p.set(x, y, true);
    carve(p, disk(120, 70, 32, 35, 9));
    carve(p, triangle(120, 70, 80, 50, 105, 50, 92, 22));
    out.push_back({"two_pieces", render(p)});
  }
  {  // 10: seeded random blobs carved from a sheet (gray noise on top)
    std::mt19937 rng(20240611u);
    BinaryImage p = rect(128, 128, 6, 6, 116, 116);
    std::uniform_real_distribution<double> pos(20, 108), rad(2, 9);
    for (int i = 0; i < 14; ++i) carve(p, disk(128, 128, pos(rng), pos(rng), rad(rng)));
    GrayImage g = render(p);
    std::uniform_int_distribution<int> noise(-12, 12);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = static_cast<std::uint8_t>(g.data()[i] + noise(rng));
    out.push_back({"random_blobs", g});
  }
  return out;
}

}  // namespace shapes
