#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cutstudio/image.hpp"
#include "cutstudio/knowledge_base.hpp"

namespace cutstudio::pattern {

// --- binarization and components --------------------------------------------

/// Otsu threshold over the 256-bin histogram. When several thresholds share the
/// maximal between-class variance the midpoint of the first and last is used.
int otsu_threshold(const GrayImage& img);

struct BinarizeOptions {
  /// Paper is the darker class unless inverted.
  bool invert = false;
};

/// Foreground (paper) = pixels at or below the Otsu threshold. A uniform image
/// is all paper when darker than mid-gray, otherwise all background.
BinaryImage binarize(const GrayImage& img, BinarizeOptions opts = {});

/// Component labels (0 = unlabeled, 1.. in raster order of first pixel).
using LabelImage = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Labels pixels whose value equals `value`, with 4- or 8-connectivity.
LabelImage label_components(const BinaryImage& img, bool value, int connectivity, int* count = nullptr);

struct CutoutMask {
  std::string cutout_id;
  BBox bbox;
  std::size_t area = 0;
  /// Foreground component (8-connected, 1-based) enclosing this cut-out.
  int parent_component = 0;
  /// Pixels of the cut-out in image coordinates, raster order.
  std::vector<Pixel> pixels;

  /// The cut-out cropped to its bbox.
  BinaryImage mask() const;
};

inline constexpr std::size_t kDefaultMinCutoutArea = 4;

/// Enclosed background regions (4-connected, not touching the border) of at
/// least `min_area` pixels, ordered by (bbox.y, bbox.x).
std::vector<CutoutMask> extract_cutouts(const BinaryImage& foreground,
                                        std::size_t min_area = kDefaultMinCutoutArea,
                                        const std::string& id_prefix = "c");

// --- contours and vector paths -----------------------------------------------

using Point = Eigen::Vector2d;
/// Closed polyline: first point repeated at the end.
using Ring = std::vector<Point>;

/// Even-odd filled set of closed subpaths.
struct VectorPath {
  std::vector<Ring> subpaths;

  std::size_t vertex_count() const;
  VectorPath translated(const Point& offset) const;
};

/// Signed shoelace area of a closed ring; outer boundaries traced here are
/// positive in image (y-down) coordinates, holes negative.
double signed_area(const Ring& ring);

/// Pixel-edge boundaries of every region in `mask`, corners only. Boundaries
/// leave diagonal-only neighbours separate. Coordinates are pixel corners
/// offset by `origin`.
VectorPath trace_boundaries(const BinaryImage& mask, const Point& origin = Point::Zero());

/// Boundary of a 4-connected mask: the outer ring first, then its holes.
/// Throws EmptyMask / DisconnectedMask.
VectorPath trace_contour(const BinaryImage& mask, const Point& origin = Point::Zero());
VectorPath trace_contour(const CutoutMask& cutout);

/// Douglas-Peucker on a closed ring.
Ring simplify_ring(const Ring& ring, double tolerance);

inline constexpr double kDefaultSimplifyTolerance = 1.0;

/// Traced and simplified boundary. Simplification never moves a pixel
/// center across the path, so the even-odd fill at pixel centers reproduces
/// the mask exactly.
VectorPath vectorize(const BinaryImage& mask, double tolerance = kDefaultSimplifyTolerance,
                     const Point& origin = Point::Zero());
VectorPath vectorize(const CutoutMask& cutout, double tolerance = kDefaultSimplifyTolerance);

/// Even-odd fill sampled at pixel centers; `origin` is the image position of
/// pixel (0, 0)'s top-left corner.
BinaryImage rasterize(const VectorPath& path, int width, int height, const Point& origin = Point::Zero());

// --- descriptors and classification -----------------------------------------

inline constexpr std::size_t kFourierCoefficients = 10;

struct ShapeDescriptor {
  double area_norm = 0;       ///< area / bbox area
  double perimeter_norm = 0;  ///< boundary length / sqrt(area)
  double circularity = 0;     ///< 1 for a disk, smaller otherwise
  std::array<double, 7> hu{};
  std::array<double, kFourierCoefficients> fourier{};  ///< harmonics 2..11, normalized

  static constexpr std::size_t kDimension = 3 + 7 + kFourierCoefficients;
  Eigen::Matrix<double, kDimension, 1> feature_vector() const;
};

/// Descriptor of a non-empty mask (all regions count toward moments; the
/// largest outer boundary supplies the Fourier terms).
ShapeDescriptor compute_descriptors(const BinaryImage& mask);
ShapeDescriptor compute_descriptors(const CutoutMask& cutout);

struct LabeledDescriptor {
  ShapeDescriptor descriptor;
  kb::PatternSubcategory subcategory = kb::PatternSubcategory::GeometricUnit;
  std::string pattern_name;
};

struct Classification {
  kb::PatternSubcategory subcategory = kb::PatternSubcategory::GeometricUnit;
  std::string pattern_name;
  double confidence = 0;  ///< share of the k neighbours voting for the winner
};

inline constexpr std::size_t kDefaultNeighbours = 5;

/// k-nearest-neighbour vote over labeled exemplars. Throws TooFewExemplars
/// when fewer than k exemplars are given.
Classification classify_unit_pattern(const ShapeDescriptor& d, const std::vector<LabeledDescriptor>& exemplars,
                                     std::size_t k = kDefaultNeighbours);

// --- interactive segmentation and sawtooth ----------------------------------

/// Union of the 8-connected foreground components containing `fg` points, at
/// the image's size. A bg point inside a selected component is
/// PointOnOppositeClass, as is an fg point on background.
BinaryImage segment_by_points(const BinaryImage& foreground, const std::vector<Pixel>& fg,
                              const std::vector<Pixel>& bg);

inline constexpr double kSawtoothThreshold = 0.6;
inline constexpr std::size_t kSawtoothPeriod = 8;

/// Fraction of significant turns on the simplified outer boundary whose
/// convex/concave sign flips within half a period on both sides.
double sawtooth_score(const BinaryImage& mask);

struct SawtoothResult {
  double score = 0;
  bool is_sawtooth = false;
};
SawtoothResult detect_sawtooth(const BinaryImage& mask, double threshold = kSawtoothThreshold);

}  // namespace cutstudio::pattern
