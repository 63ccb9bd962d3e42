#include "cutstudio/moodboard.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace cutstudio::moodboard {

Affine translation(double dx, double dy) {
  Affine m = Affine::Identity();
  m(0, 2) = dx;
  m(1, 2) = dy;
  return m;
}

Affine scaling(double sx, double sy) {
  Affine m = Affine::Identity();
  m(0, 0) = sx;
  m(1, 1) = sy;
  return m;
}

Affine rotation(double degrees) {
  double c, s;
  const double quarter = degrees / 90.0;
  if (quarter == std::floor(quarter) && std::abs(quarter) < 1e15) {
    const long long q = static_cast<long long>(quarter);
    switch (((q % 4) + 4) % 4) {
      case 0: c = 1, s = 0; break;
      case 1: c = 0, s = 1; break;
      case 2: c = -1, s = 0; break;
      default: c = 0, s = -1; break;
    }
  } else {
    const double r = degrees * M_PI / 180.0;
    c = std::cos(r);
    s = std::sin(r);
  }
  Affine m = Affine::Zero();
  m(0, 0) = c;
  m(0, 1) = -s;
  m(1, 0) = s;
  m(1, 1) = c;
  return m;
}

Affine flip_h() { return scaling(-1, 1); }
Affine flip_v() { return scaling(1, -1); }

// --- names --------------------------------------------------------------------

std::string_view to_string(ElementKind k) { return k == ElementKind::Contour ? "contour" : "cutout"; }
std::string_view to_string(Fill f) { return f == Fill::Foreground ? "foreground" : "hole"; }

std::string_view to_string(Source s) {
  switch (s) {
    case Source::Retrieved: return "retrieved";
    case Source::Generated: return "generated";
    case Source::Extracted: return "extracted";
  }
  return "extracted";
}

ElementKind parse_kind(std::string_view s) {
  if (s == "contour") return ElementKind::Contour;
  if (s == "cutout") return ElementKind::Cutout;
  fail(ErrorCode::InvalidArgument, "unknown element kind: " + std::string(s));
}

Fill parse_fill(std::string_view s) {
  if (s == "foreground") return Fill::Foreground;
  if (s == "hole") return Fill::Hole;
  fail(ErrorCode::InvalidArgument, "unknown fill: " + std::string(s));
}

Source parse_source(std::string_view s) {
  if (s == "retrieved") return Source::Retrieved;
  if (s == "generated") return Source::Generated;
  if (s == "extracted") return Source::Extracted;
  fail(ErrorCode::InvalidArgument, "unknown source: " + std::string(s));
}

std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::Translate: return "translate";
    case TransformKind::Scale: return "scale";
    case TransformKind::Rotate: return "rotate";
    case TransformKind::FlipH: return "flip_h";
    case TransformKind::FlipV: return "flip_v";
  }
  return "translate";
}

TransformKind parse_transform_kind(std::string_view s) {
  for (auto k : {TransformKind::Translate, TransformKind::Scale, TransformKind::Rotate, TransformKind::FlipH,
                 TransformKind::FlipV})
    if (to_string(k) == s) return k;
  fail(ErrorCode::InvalidArgument, "unknown transform: " + std::string(s));
}

std::string_view to_string(ZMove m) {
  switch (m) {
    case ZMove::Front: return "front";
    case ZMove::Back: return "back";
    case ZMove::Forward: return "forward";
    case ZMove::Backward: return "backward";
  }
  return "front";
}

ZMove parse_zmove(std::string_view s) {
  for (auto m : {ZMove::Front, ZMove::Back, ZMove::Forward, ZMove::Backward})
    if (to_string(m) == s) return m;
  fail(ErrorCode::InvalidArgument, "unknown z move: " + std::string(s));
}

bool valid_id(std::string_view id) {
  if (id.empty() || id.size() > 64 || id == "canvas") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '.' ||
           c == '-';
  });
}

double snap(double v) {
  // 12345 * 1e-4 is not always the double nearest 1.2345; division is.
  const double q = std::round(v * 1e4) / 1e4;
  return q == 0 ? 0.0 : q;
}

pattern::VectorPath snapped(const pattern::VectorPath& path) {
  pattern::VectorPath out = path;
  for (auto& ring : out.subpaths)
    for (auto& p : ring) p = pattern::Point(snap(p.x()), snap(p.y()));
  return out;
}

// --- scene graph ----------------------------------------------------------------

const std::string& node_id(const Node& n) {
  return std::visit([](const auto& v) -> const std::string& { return v.id; }, n);
}

const Affine& node_transform(const Node& n) {
  return std::visit([](const auto& v) -> const Affine& { return v.transform; }, n);
}

static Affine& node_transform(Node& n) {
  return std::visit([](auto& v) -> Affine& { return v.transform; }, n);
}

const Node& SceneGraph::node(const std::string& id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) fail(ErrorCode::UnknownId, "no node " + id);
  return it->second;
}

const Element& SceneGraph::element(const std::string& id) const {
  const auto* e = std::get_if<Element>(&node(id));
  if (!e) fail(ErrorCode::InvalidArgument, id + " is a group");
  return *e;
}

const Group& SceneGraph::group(const std::string& id) const {
  const auto* g = std::get_if<Group>(&node(id));
  if (!g) fail(ErrorCode::NotAGroup, id + " is not a group");
  return *g;
}

std::optional<std::string> SceneGraph::parent_of(const std::string& id) const {
  node(id);
  for (const auto& [pid, n] : nodes) {
    const auto& list = std::holds_alternative<Group>(n) ? std::get<Group>(n).children : std::get<Element>(n).holes;
    if (std::find(list.begin(), list.end(), id) != list.end()) return pid;
  }
  return std::nullopt;
}

Affine SceneGraph::world_transform(const std::string& id) const {
  Affine w = node_transform(node(id));
  std::set<std::string> seen{id};
  for (auto p = parent_of(id); p; p = parent_of(*p)) {
    if (!seen.insert(*p).second) fail(ErrorCode::InvalidArgument, "cycle at " + *p);
    w = compose(node_transform(node(*p)), w);
  }
  return w;
}

namespace {

std::vector<std::string>& child_list(Node& n) {
  if (auto* g = std::get_if<Group>(&n)) return g->children;
  return std::get<Element>(n).holes;
}

/// The list holding `id`: roots, a group's children or an element's holes.
std::vector<std::string>& owner_list(SceneGraph& b, const std::string& id) {
  if (auto p = b.parent_of(id)) return child_list(b.nodes.at(*p));
  return b.roots;
}

std::string fresh_id(SceneGraph& b) {
  for (;;) {
    std::string id = "n" + std::to_string(b.next_id++);
    if (!b.contains(id)) return id;
  }
}

Node& mutable_node(SceneGraph& b, const std::string& id) {
  auto it = b.nodes.find(id);
  if (it == b.nodes.end()) fail(ErrorCode::UnknownId, "no node " + id);
  return it->second;
}

}  // namespace

std::vector<std::string> check_invariants(const SceneGraph& board) {
  std::vector<std::string> problems;
  std::map<std::string, int> refs;
  auto count = [&](const std::vector<std::string>& ids, const std::string& where) {
    for (const auto& c : ids) {
      ++refs[c];
      if (!board.contains(c)) problems.push_back(where + " references missing " + c);
    }
  };
  count(board.roots, "roots");
  for (const auto& [id, n] : board.nodes) {
    if (node_id(n) != id) problems.push_back("key " + id + " holds node " + node_id(n));
    if (!valid_id(id)) problems.push_back("invalid id " + id);
    if (!(std::abs(determinant(node_transform(n))) > kSingularEpsilon) || !node_transform(n).allFinite())
      problems.push_back("singular transform on " + id);
    if (const auto* g = std::get_if<Group>(&n)) {
      count(g->children, id);
    } else {
      const auto& e = std::get<Element>(n);
      count(e.holes, id);
      if (e.kind == ElementKind::Cutout && e.fill != Fill::Hole) problems.push_back("cutout " + id + " not hole-filled");
      if (e.kind == ElementKind::Cutout && !e.holes.empty()) problems.push_back("cutout " + id + " has holes");
      for (const auto& h : e.holes) {
        auto it = board.nodes.find(h);
        if (it == board.nodes.end()) continue;
        const auto* he = std::get_if<Element>(&it->second);
        if (!he || he->kind != ElementKind::Cutout) problems.push_back("hole " + h + " of " + id + " is not a cutout");
      }
    }
  }
  for (const auto& [id, n] : board.nodes) {
    (void)n;
    auto it = refs.find(id);
    const int c = it == refs.end() ? 0 : it->second;
    if (c != 1) problems.push_back(id + " referenced " + std::to_string(c) + " times");
  }
  // Reachability from the roots; with single references this rules out cycles.
  std::set<std::string> seen;
  std::function<void(const std::string&, int)> walk = [&](const std::string& id, int depth) {
    if (depth > 10000 || !seen.insert(id).second) return;
    auto it = board.nodes.find(id);
    if (it == board.nodes.end()) return;
    const auto& kids = std::holds_alternative<Group>(it->second) ? std::get<Group>(it->second).children
                                                                 : std::get<Element>(it->second).holes;
    for (const auto& k : kids) walk(k, depth + 1);
  };
  for (const auto& r : board.roots) walk(r, 0);
  for (const auto& [id, n] : board.nodes) {
    (void)n;
    if (!seen.count(id)) problems.push_back(id + " unreachable from the roots");
  }
  return problems;
}

// --- operations -----------------------------------------------------------------

SceneGraph add_element(SceneGraph board, Element element) {
  if (element.id.empty()) element.id = fresh_id(board);
  if (!valid_id(element.id)) fail(ErrorCode::InvalidArgument, "invalid id: " + element.id);
  if (board.contains(element.id)) fail(ErrorCode::DuplicateId, "duplicate id " + element.id);
  if (!element.holes.empty()) fail(ErrorCode::InvalidArgument, "new elements carry no holes");
  if (element.kind == ElementKind::Cutout && element.fill != Fill::Hole)
    fail(ErrorCode::InvalidArgument, "cutout elements are hole-filled");
  if (!element.transform.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite transform");
  inverse(element.transform);
  if (element.path.subpaths.empty()) fail(ErrorCode::InvalidArgument, "element has no geometry");
  for (const auto& ring : element.path.subpaths) {
    if (ring.size() < 4) fail(ErrorCode::InvalidArgument, "ring needs at least three vertices");
    for (const auto& p : ring)
      if (!p.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite coordinate");
    if (ring.front() != ring.back()) fail(ErrorCode::InvalidArgument, "ring is not closed");
  }
  element.path = snapped(element.path);
  board.roots.push_back(element.id);
  const std::string id = element.id;
  board.nodes.emplace(id, std::move(element));
  return board;
}

Affine TransformOp::matrix() const {
  if (!std::isfinite(x) || !std::isfinite(y)) fail(ErrorCode::InvalidArgument, "non-finite transform parameter");
  switch (kind) {
    case TransformKind::Translate: return translation(x, y);
    case TransformKind::Scale:
      if (x == 0 || y == 0) fail(ErrorCode::SingularTransform, "zero scale factor");
      return scaling(x, y);
    case TransformKind::Rotate: return rotation(x);
    case TransformKind::FlipH: return flip_h();
    case TransformKind::FlipV: return flip_v();
  }
  return Affine::Identity();
}

SceneGraph apply_transform(SceneGraph board, const std::string& id, const TransformOp& op) {
  const Affine m = op.matrix();
  Affine& t = node_transform(mutable_node(board, id));
  const Affine next = compose(m, t);
  inverse(next);
  t = next;
  return board;
}

SceneGraph group(SceneGraph board, const std::vector<std::string>& ids, std::string* new_id) {
  if (ids.size() < 2) fail(ErrorCode::CrossParentGroup, "grouping needs at least two nodes");
  std::set<std::string> distinct(ids.begin(), ids.end());
  if (distinct.size() != ids.size()) fail(ErrorCode::CrossParentGroup, "repeated id in group");
  for (const auto& id : ids) board.node(id);
  const auto parent = board.parent_of(ids.front());
  for (const auto& id : ids)
    if (board.parent_of(id) != parent) fail(ErrorCode::CrossParentGroup, "nodes have different parents");
  if (parent && std::holds_alternative<Element>(board.nodes.at(*parent)))
    fail(ErrorCode::CrossParentGroup, "applied holes cannot be grouped");

  auto& list = parent ? child_list(board.nodes.at(*parent)) : board.roots;
  Group g;
  g.id = fresh_id(board);
  std::size_t insert_at = list.size();
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (distinct.count(list[i])) {
      insert_at = std::min(insert_at, rest.size());
      g.children.push_back(list[i]);
    } else {
      rest.push_back(list[i]);
    }
  }
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(insert_at), g.id);
  list = std::move(rest);
  if (new_id) *new_id = g.id;
  const std::string gid = g.id;
  board.nodes.emplace(gid, std::move(g));
  return board;
}

SceneGraph ungroup(SceneGraph board, const std::string& group_id) {
  const Group g = board.group(group_id);
  for (const auto& c : g.children) {
    Affine& t = node_transform(board.nodes.at(c));
    t = compose(g.transform, t);
  }
  auto& list = owner_list(board, group_id);
  auto it = std::find(list.begin(), list.end(), group_id);
  it = list.erase(it);
  list.insert(it, g.children.begin(), g.children.end());
  board.nodes.erase(group_id);
  return board;
}

namespace {

std::string copy_subtree(SceneGraph& b, const std::string& id) {
  Node copy = b.nodes.at(id);
  const std::string nid = fresh_id(b);
  std::visit([&](auto& v) { v.id = nid; }, copy);
  for (auto& c : child_list(copy)) c = copy_subtree(b, c);
  b.nodes.emplace(nid, std::move(copy));
  return nid;
}

void erase_subtree(SceneGraph& b, const std::string& id) {
  const auto kids = child_list(b.nodes.at(id));
  for (const auto& c : kids) erase_subtree(b, c);
  b.nodes.erase(id);
}

}  // namespace

SceneGraph duplicate(SceneGraph board, const std::string& id, std::string* new_id) {
  board.node(id);
  const std::string nid = copy_subtree(board, id);
  auto& list = owner_list(board, id);
  auto it = std::find(list.begin(), list.end(), id);
  list.insert(it + 1, nid);
  if (new_id) *new_id = nid;
  return board;
}

bool Bounds::intersects(const Bounds& o) const {
  if (empty || o.empty) return false;
  return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1;
}

namespace {

void extend(Bounds& b, const SceneGraph& board, const std::string& id, const Affine& parent) {
  const Node& n = board.node(id);
  const Affine w = compose(parent, node_transform(n));
  if (const auto* g = std::get_if<Group>(&n)) {
    for (const auto& c : g->children) extend(b, board, c, w);
    return;
  }
  for (const auto& ring : std::get<Element>(n).path.subpaths)
    for (const auto& p : ring) {
      const pattern::Point q = apply(w, pattern::Point(p));
      if (b.empty) {
        b = Bounds{q.x(), q.y(), q.x(), q.y(), false};
      } else {
        b.x0 = std::min(b.x0, q.x());
        b.y0 = std::min(b.y0, q.y());
        b.x1 = std::max(b.x1, q.x());
        b.y1 = std::max(b.y1, q.y());
      }
    }
}

}  // namespace

Bounds world_bounds(const SceneGraph& board, const std::string& id) {
  Bounds b;
  Affine parent = Affine::Identity();
  if (auto p = board.parent_of(id)) parent = board.world_transform(*p);
  extend(b, board, id, parent);
  return b;
}

SceneGraph apply_cutout(SceneGraph board, const std::string& cutout_id, const std::string& target_id) {
  const auto* cut = std::get_if<Element>(&board.node(cutout_id));
  if (!cut || cut->kind != ElementKind::Cutout) fail(ErrorCode::NotACutout, cutout_id + " is not a cut-out");
  const auto* target = std::get_if<Element>(&board.node(target_id));
  if (!target || target->kind != ElementKind::Contour)
    fail(ErrorCode::InvalidArgument, target_id + " is not a contour element");
  if (!world_bounds(board, cutout_id).intersects(world_bounds(board, target_id)))
    fail(ErrorCode::NoOverlap, cutout_id + " does not overlap " + target_id);

  const Affine relative = compose(inverse(board.world_transform(target_id)), board.world_transform(cutout_id));
  auto& list = owner_list(board, cutout_id);
  list.erase(std::find(list.begin(), list.end(), cutout_id));
  std::get<Element>(board.nodes.at(cutout_id)).transform = relative;
  std::get<Element>(board.nodes.at(target_id)).holes.push_back(cutout_id);
  return board;
}

SceneGraph remove(SceneGraph board, const std::string& id) {
  board.node(id);
  auto& list = owner_list(board, id);
  list.erase(std::find(list.begin(), list.end(), id));
  erase_subtree(board, id);
  return board;
}

SceneGraph reorder(SceneGraph board, const std::string& id, ZMove move) {
  board.node(id);
  auto& list = owner_list(board, id);
  const auto i = static_cast<std::size_t>(std::find(list.begin(), list.end(), id) - list.begin());
  switch (move) {
    case ZMove::Front: std::rotate(list.begin() + i, list.begin() + i + 1, list.end()); break;
    case ZMove::Back: std::rotate(list.begin(), list.begin() + i, list.begin() + i + 1); break;
    case ZMove::Forward:
      if (i + 1 < list.size()) std::swap(list[i], list[i + 1]);
      break;
    case ZMove::Backward:
      if (i > 0) std::swap(list[i], list[i - 1]);
      break;
  }
  return board;
}

}  // namespace cutstudio::moodboard
