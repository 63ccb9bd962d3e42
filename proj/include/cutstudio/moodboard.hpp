#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cutstudio/error.hpp"
#include "cutstudio/pattern_engine.hpp"

namespace cutstudio::moodboard {

// --- affine algebra ----------------------------------------------------------

/// 2x3 affine map [a c e; b d f]: x' = a x + c y + e, y' = b x + d y + f.
template <typename Scalar>
using Affine2 = Eigen::Matrix<Scalar, 2, 3>;
using Affine = Affine2<double>;

template <typename Scalar = double>
Affine2<Scalar> identity() {
  return Affine2<Scalar>::Identity();
}

/// A after B (apply B first).
template <typename Scalar>
Affine2<Scalar> compose(const Affine2<Scalar>& a, const Affine2<Scalar>& b) {
  Affine2<Scalar> out;
  out.template leftCols<2>() = a.template leftCols<2>() * b.template leftCols<2>();
  out.col(2) = a.template leftCols<2>() * b.col(2) + a.col(2);
  return out;
}

template <typename Scalar>
Scalar determinant(const Affine2<Scalar>& m) {
  return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
}

inline constexpr double kSingularEpsilon = 1e-12;

template <typename Scalar>
Affine2<Scalar> inverse(const Affine2<Scalar>& m) {
  const Scalar det = determinant(m);
  if (!(std::abs(det) > Scalar(kSingularEpsilon))) fail(ErrorCode::SingularTransform, "transform is not invertible");
  Affine2<Scalar> out;
  out(0, 0) = m(1, 1) / det;
  out(0, 1) = -m(0, 1) / det;
  out(1, 0) = -m(1, 0) / det;
  out(1, 1) = m(0, 0) / det;
  out.col(2) = -(out.template leftCols<2>() * m.col(2));
  return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> apply(const Affine2<Scalar>& m, const Eigen::Matrix<Scalar, 2, 1>& p) {
  return m.template leftCols<2>() * p + m.col(2);
}

Affine translation(double dx, double dy);
Affine scaling(double sx, double sy);
/// [cos -sin; sin cos]. In y-down canvas coordinates positive angles turn
/// clockwise on screen. Multiples of 90 degrees are exact.
Affine rotation(double degrees);
Affine flip_h();
Affine flip_v();

// --- scene graph -------------------------------------------------------------

enum class ElementKind { Contour, Cutout };
enum class Fill { Foreground, Hole };
enum class Source { Retrieved, Generated, Extracted };

std::string_view to_string(ElementKind k);
std::string_view to_string(Fill f);
std::string_view to_string(Source s);
ElementKind parse_kind(std::string_view s);
Fill parse_fill(std::string_view s);
Source parse_source(std::string_view s);

struct Provenance {
  Source source = Source::Extracted;
  std::string work_id;
  std::string cutout_id;

  bool operator==(const Provenance&) const = default;
};

/// Path coordinates are snapped to the 1e-4 export grid when added.
inline constexpr double kGrid = 1e-4;
double snap(double v);
pattern::VectorPath snapped(const pattern::VectorPath& path);

struct Element {
  std::string id;
  pattern::VectorPath path;  ///< local coordinates, closed rings
  Affine transform = Affine::Identity();
  ElementKind kind = ElementKind::Contour;
  Fill fill = Fill::Foreground;
  Provenance provenance;
  /// Applied cut-outs (ids of cutout elements) in application order. Their
  /// transforms are relative to this element.
  std::vector<std::string> holes;
};

struct Group {
  std::string id;
  std::vector<std::string> children;  ///< back to front
  Affine transform = Affine::Identity();
};

using Node = std::variant<Element, Group>;

const std::string& node_id(const Node& n);
const Affine& node_transform(const Node& n);

struct SceneGraph {
  std::vector<std::string> roots;  ///< z-order, back to front
  std::map<std::string, Node> nodes;
  double canvas_width = 1000;
  double canvas_height = 1000;
  std::size_t next_id = 1;  ///< source of fresh ids ("n<k>")

  const Node& node(const std::string& id) const;
  bool contains(const std::string& id) const { return nodes.count(id) != 0; }
  const Element& element(const std::string& id) const;
  const Group& group(const std::string& id) const;

  /// Parent id (group or, for applied holes, the target element); nullopt
  /// for roots.
  std::optional<std::string> parent_of(const std::string& id) const;
  /// Product of ancestor transforms and the node's own.
  Affine world_transform(const std::string& id) const;
};

/// Forest invariants: every node referenced exactly once (roots, group
/// children, element holes), no dangling ids, no cycles, holes are cut-outs,
/// transforms invertible, cutout => hole fill. Empty when valid.
std::vector<std::string> check_invariants(const SceneGraph& board);

/// Ids are 1-64 characters from [A-Za-z0-9_.-], and "canvas" is reserved.
bool valid_id(std::string_view id);

// --- operations (value in, value out) ----------------------------------------

/// Appends on top. An empty id gets a fresh one. Throws DuplicateId,
/// SingularTransform, InvalidArgument (cutout not hole-filled).
SceneGraph add_element(SceneGraph board, Element element);

enum class TransformKind { Translate, Scale, Rotate, FlipH, FlipV };
std::string_view to_string(TransformKind k);
TransformKind parse_transform_kind(std::string_view s);

struct TransformOp {
  TransformKind kind = TransformKind::Translate;
  double x = 0;  ///< dx, sx or degrees
  double y = 0;  ///< dy or sy

  Affine matrix() const;
};

/// Left-composes the op with the node's transform. Throws UnknownId,
/// SingularTransform (zero scale).
SceneGraph apply_transform(SceneGraph board, const std::string& id, const TransformOp& op);

/// New identity group (fresh id) in place of the lowest member. Throws
/// UnknownId, CrossParentGroup (fewer than two ids, repeats, or different
/// parents).
SceneGraph group(SceneGraph board, const std::vector<std::string>& ids, std::string* new_id = nullptr);

/// Splices the children into the parent, pushing the group transform into
/// each. Throws UnknownId, NotAGroup.
SceneGraph ungroup(SceneGraph board, const std::string& group_id);

/// Deep copy with fresh ids directly above the source.
SceneGraph duplicate(SceneGraph board, const std::string& id, std::string* new_id = nullptr);

/// Makes the cut-out a hole of the target. Throws UnknownId, NotACutout,
/// InvalidArgument (target not a contour element), NoOverlap.
SceneGraph apply_cutout(SceneGraph board, const std::string& cutout_id, const std::string& target_id);

/// Removes a node and its subtree.
SceneGraph remove(SceneGraph board, const std::string& id);

enum class ZMove { Front, Back, Forward, Backward };
std::string_view to_string(ZMove m);
ZMove parse_zmove(std::string_view s);
/// Moves a node within its parent's child list.
SceneGraph reorder(SceneGraph board, const std::string& id, ZMove move);

/// Axis-aligned bounds of the node's geometry in world coordinates.
struct Bounds {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty = true;
  bool intersects(const Bounds& o) const;
};
Bounds world_bounds(const SceneGraph& board, const std::string& id);

// --- export / import ----------------------------------------------------------

struct ExportOptions {
  /// Physical units per canvas unit, written into width/height as mm.
  double scale = 1.0;
};

/// Canonical constrained SVG (see docs/export-profile.md).
std::string export_svg(const SceneGraph& board, const ExportOptions& opts = {});
/// Throws UnsupportedFeature for anything outside the profile.
SceneGraph import_svg(const std::string& document);

/// Exact number formats used by the profile.
std::string format_coordinate(double v);
std::string format_matrix_entry(double v);

// --- JSON and sessions -------------------------------------------------------

nlohmann::json to_json(const SceneGraph& board);
SceneGraph board_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Element& e);
Element element_from_json(const nlohmann::json& j);

/// One recorded mutation: op name plus JSON arguments.
struct BoardOp {
  std::string op;
  nlohmann::json args;

  bool operator==(const BoardOp&) const = default;
};

/// Dispatches add / transform / group / ungroup / duplicate / apply_cutout /
/// remove / reorder. Unknown ops and malformed arguments are InvalidArgument.
/// `created_id` receives the new node id for add, group and duplicate.
SceneGraph apply_op(SceneGraph board, const BoardOp& op, std::string* created_id = nullptr);

/// Linear history: the board is always `initial` with `log` replayed.
class BoardHistory {
 public:
  BoardHistory() = default;
  explicit BoardHistory(SceneGraph initial) : initial_(initial), current_(std::move(initial)) {}

  const SceneGraph& current() const { return current_; }
  const SceneGraph& initial() const { return initial_; }
  const std::vector<BoardOp>& log() const { return log_; }
  /// Monotone counter bumped by every successful apply or undo.
  std::size_t version() const { return version_; }

  /// Applies and records; on error nothing changes.
  const SceneGraph& apply(const BoardOp& op, std::string* created_id = nullptr);
  /// Drops the last op and replays. Returns false when there is nothing to undo.
  bool undo();
  SceneGraph replay() const;

  nlohmann::json to_json() const;
  static BoardHistory from_json(const nlohmann::json& j);

 private:
  SceneGraph initial_;
  SceneGraph current_;
  std::vector<BoardOp> log_;
  std::size_t version_ = 0;
};

/// Session file: {"schema": "cutstudio.session", "version": 1, ...}. Throws
/// CorruptSession on unreadable or inconsistent content (including a saved
/// board that differs from the replayed log).
void save_session(const BoardHistory& history, const std::filesystem::path& path,
                  const nlohmann::json& extra = nlohmann::json::object());
BoardHistory load_session(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

}  // namespace cutstudio::moodboard
