#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include "cutstudio/error.hpp"
#include "cutstudio/pattern_engine.hpp"

namespace cutstudio::pattern {

namespace {

/// Integral of (t - c)^p over [x, x + 1].
double unit_integral(double x, double c, int p) {
  return (std::pow(x + 1 - c, p + 1) - std::pow(x - c, p + 1)) / (p + 1);
}

struct CentralMoments {
  double m00 = 0;
  double mu[4][4] = {};  // mu[p][q], p + q <= 3
};

/// Moments with each pixel treated as a unit square, coordinates relative to
/// the mask's bbox so that translation does not change the arithmetic.
CentralMoments central_moments(const BinaryImage& mask, const BBox& box) {
  CentralMoments m;
  double sx = 0, sy = 0;
  for (int y = box.y; y < box.y + box.h; ++y)
    for (int x = box.x; x < box.x + box.w; ++x)
      if (mask.at(x, y)) {
        m.m00 += 1;
        sx += (x - box.x) + 0.5;
        sy += (y - box.y) + 0.5;
      }
  const double cx = sx / m.m00, cy = sy / m.m00;
  for (int y = box.y; y < box.y + box.h; ++y)
    for (int x = box.x; x < box.x + box.w; ++x) {
      if (!mask.at(x, y)) continue;
      double ix[4], iy[4];
      for (int p = 0; p < 4; ++p) {
        ix[p] = unit_integral(x - box.x, cx, p);
        iy[p] = unit_integral(y - box.y, cy, p);
      }
      for (int p = 0; p < 4; ++p)
        for (int q = 0; p + q < 4; ++q) m.mu[p][q] += ix[p] * iy[q];
    }
  return m;
}

std::array<double, 7> hu_invariants(const CentralMoments& m) {
  auto eta = [&](int p, int q) { return m.mu[p][q] / std::pow(m.m00, 1.0 + (p + q) / 2.0); };
  const double n20 = eta(2, 0), n02 = eta(0, 2), n11 = eta(1, 1);
  const double n30 = eta(3, 0), n03 = eta(0, 3), n21 = eta(2, 1), n12 = eta(1, 2);
  const double a = n30 + n12, b = n21 + n03;
  return {
      n20 + n02,
      (n20 - n02) * (n20 - n02) + 4 * n11 * n11,
      (n30 - 3 * n12) * (n30 - 3 * n12) + (3 * n21 - n03) * (3 * n21 - n03),
      a * a + b * b,
      (n30 - 3 * n12) * a * (a * a - 3 * b * b) + (3 * n21 - n03) * b * (3 * a * a - b * b),
      (n20 - n02) * (a * a - b * b) + 4 * n11 * a * b,
      (3 * n21 - n03) * a * (a * a - 3 * b * b) - (n30 - 3 * n12) * b * (3 * a * a - b * b),
  };
}

/// Fourier coefficient of the arc-length parametrized closed polygon.
std::complex<double> fourier_coefficient(const Ring& ring, double length, int k) {
  using C = std::complex<double>;
  const double omega = 2 * std::numbers::pi * k / length;
  const C a(0, -omega);
  C sum = 0;
  double s = 0;
  for (std::size_t j = 0; j + 1 < ring.size(); ++j) {
    const C z0(ring[j].x(), ring[j].y()), z1(ring[j + 1].x(), ring[j + 1].y());
    const double l = std::abs(z1 - z0);
    if (l == 0) continue;
    const C u = (z1 - z0) / l;
    const C e = std::exp(a * l);
    sum += std::exp(a * s) * (z0 * (e - 1.0) / a + u * (e * (l / a - 1.0 / (a * a)) + 1.0 / (a * a)));
    s += l;
  }
  return sum / length;
}

double ring_length(const Ring& ring) {
  double l = 0;
  for (std::size_t j = 0; j + 1 < ring.size(); ++j) l += (ring[j + 1] - ring[j]).norm();
  return l;
}

const Ring* largest_outer(const VectorPath& path) {
  const Ring* best = nullptr;
  double best_area = 0;
  for (const auto& r : path.subpaths)
    if (double a = signed_area(r); a > best_area) best_area = a, best = &r;
  return best;
}

}  // namespace

Eigen::Matrix<double, ShapeDescriptor::kDimension, 1> ShapeDescriptor::feature_vector() const {
  Eigen::Matrix<double, kDimension, 1> v;
  v << area_norm, perimeter_norm, circularity, hu[0], hu[1], hu[2], hu[3], hu[4], hu[5], hu[6], fourier[0],
      fourier[1], fourier[2], fourier[3], fourier[4], fourier[5], fourier[6], fourier[7], fourier[8], fourier[9];
  return v;
}

ShapeDescriptor compute_descriptors(const BinaryImage& mask) {
  const BBox box = mask.bbox();
  if (box.w == 0) fail(ErrorCode::EmptyMask, "mask has no pixels");
  const CentralMoments m = central_moments(mask, box);

  ShapeDescriptor d;
  d.area_norm = m.m00 / (static_cast<double>(box.w) * box.h);
  d.circularity = m.m00 * m.m00 / (2 * std::numbers::pi * (m.mu[2][0] + m.mu[0][2]));
  d.hu = hu_invariants(m);

  const VectorPath boundary = trace_boundaries(mask.crop(box));
  double perimeter = 0;
  for (const auto& r : boundary.subpaths) perimeter += ring_length(r);
  d.perimeter_norm = perimeter / std::sqrt(m.m00);

  const Ring& outer = *largest_outer(boundary);
  const double length = ring_length(outer);
  const double base = std::abs(fourier_coefficient(outer, length, 1)) + std::abs(fourier_coefficient(outer, length, -1));
  for (std::size_t i = 0; i < kFourierCoefficients; ++i) {
    const int k = static_cast<int>(i) + 2;
    d.fourier[i] = (std::abs(fourier_coefficient(outer, length, k)) +
                    std::abs(fourier_coefficient(outer, length, -k))) / base;
  }
  return d;
}

ShapeDescriptor compute_descriptors(const CutoutMask& cutout) { return compute_descriptors(cutout.mask()); }

Classification classify_unit_pattern(const ShapeDescriptor& d, const std::vector<LabeledDescriptor>& exemplars,
                                     std::size_t k) {
  if (k == 0) fail(ErrorCode::InvalidArgument, "k must be positive");
  if (exemplars.size() < k)
    fail(ErrorCode::TooFewExemplars,
         "need " + std::to_string(k) + " exemplars, have " + std::to_string(exemplars.size()));
  const auto q = d.feature_vector();
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(exemplars.size());
  for (std::size_t i = 0; i < exemplars.size(); ++i)
    dist.emplace_back((exemplars[i].descriptor.feature_vector() - q).norm(), i);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  struct Vote {
    std::size_t count = 0;
    double total = 0;
    kb::PatternSubcategory subcategory{};
  };
  std::map<std::string, Vote> votes;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& ex = exemplars[dist[i].second];
    auto& v = votes[ex.pattern_name];
    ++v.count;
    v.total += dist[i].first;
    v.subcategory = ex.subcategory;
  }
  // Most votes, then nearest on average, then name (map order).
  auto best = votes.begin();
  for (auto it = std::next(votes.begin()); it != votes.end(); ++it) {
    const Vote& c = it->second;
    const Vote& b = best->second;
    if (c.count > b.count || (c.count == b.count && c.total / c.count < b.total / b.count)) best = it;
  }
  return {best->second.subcategory, best->first, static_cast<double>(best->second.count) / static_cast<double>(k)};
}

double sawtooth_score(const BinaryImage& mask) {
  if (mask.empty_mask()) fail(ErrorCode::EmptyMask, "mask has no pixels");
  const VectorPath boundary = trace_boundaries(mask);
  const Ring* outer = largest_outer(boundary);
  if (!outer) return 0;
  const Ring ring = simplify_ring(*outer, 1.5);
  const std::size_t n = ring.size() - 1;

  constexpr double kMinTurn = 20.0 * std::numbers::pi / 180.0;
  std::vector<int> signs;
  for (std::size_t i = 0; i < n; ++i) {
    const Point e0 = ring[i] - ring[(i + n - 1) % n];
    const Point e1 = ring[i + 1] - ring[i];
    const double turn = std::atan2(e0.x() * e1.y() - e0.y() * e1.x(), e0.dot(e1));
    if (std::abs(turn) > kMinTurn) signs.push_back(turn > 0 ? 1 : -1);
  }
  const std::size_t m = signs.size();
  if (m < 2) return 0;

  // A turn alternates when the sign flips within half a period on both sides.
  const std::size_t half = std::min(kSawtoothPeriod / 2, m - 1);
  std::size_t counted = 0;
  for (std::size_t i = 0; i < m; ++i) {
    bool ahead = false, behind = false;
    for (std::size_t j = 1; j <= half; ++j) {
      ahead = ahead || signs[(i + j) % m] != signs[i];
      behind = behind || signs[(i + m - j) % m] != signs[i];
    }
    counted += ahead && behind;
  }
  return static_cast<double>(counted) / static_cast<double>(m);
}

SawtoothResult detect_sawtooth(const BinaryImage& mask, double threshold) {
  const double s = sawtooth_score(mask);
  return {s, s >= threshold};
}

}  // namespace cutstudio::pattern
