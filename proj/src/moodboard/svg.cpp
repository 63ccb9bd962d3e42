#include "cutstudio/moodboard.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "cutstudio/text.hpp"

namespace cutstudio::moodboard {

namespace {

constexpr std::string_view kSvgNs = "http://www.w3.org/2000/svg";
constexpr std::string_view kProfile = "cutstudio-svg-1";

}  // namespace

std::string format_coordinate(double v) {
  if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "non-finite coordinate");
  const long long q = std::llround(v * 1e4);
  if (q == 0) return "0";
  const unsigned long long a = q < 0 ? static_cast<unsigned long long>(-q) : static_cast<unsigned long long>(q);
  std::string out = q < 0 ? "-" : "";
  out += std::to_string(a / 10000);
  unsigned long long frac = a % 10000;
  if (frac) {
    std::string digits = std::to_string(frac);
    digits.insert(0, 4 - digits.size(), '0');
    while (digits.back() == '0') digits.pop_back();
    out += "." + digits;
  }
  return out;
}

std::string format_matrix_entry(double v) {
  if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "non-finite matrix entry");
  if (v == 0) return "0";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

// --- writer ---------------------------------------------------------------------

struct XmlNode {
  std::string name;
  std::map<std::string, std::string> attrs;  // sorted: canonical order
  std::vector<XmlNode> children;
};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write(std::ostringstream& os, const XmlNode& n, int depth) {
  os << std::string(static_cast<std::size_t>(depth) * 2, ' ') << '<' << n.name;
  for (const auto& [k, v] : n.attrs) os << ' ' << k << "=\"" << escape(v) << '"';
  if (n.children.empty()) {
    os << "/>\n";
    return;
  }
  os << ">\n";
  for (const auto& c : n.children) write(os, c, depth + 1);
  os << std::string(static_cast<std::size_t>(depth) * 2, ' ') << "</" << n.name << ">\n";
}

std::string matrix_attr(const Affine& m) {
  return "matrix(" + format_matrix_entry(m(0, 0)) + " " + format_matrix_entry(m(1, 0)) + " " +
         format_matrix_entry(m(0, 1)) + " " + format_matrix_entry(m(1, 1)) + " " + format_matrix_entry(m(0, 2)) +
         " " + format_matrix_entry(m(1, 2)) + ")";
}

void append_rings(std::string& d, const pattern::VectorPath& path, const Affine& m) {
  for (const auto& ring : path.subpaths) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      const pattern::Point p = apply(m, pattern::Point(ring[i]));
      if (!d.empty()) d += ' ';
      d += (i == 0 ? "M " : "L ") + format_coordinate(p.x()) + " " + format_coordinate(p.y());
    }
    d += " Z";
  }
}

void provenance_attrs(XmlNode& n, const Element& e) {
  n.attrs["data-kind"] = std::string(to_string(e.kind));
  n.attrs["data-source"] = std::string(to_string(e.provenance.source));
  if (!e.provenance.work_id.empty()) n.attrs["data-work-id"] = e.provenance.work_id;
  if (!e.provenance.cutout_id.empty()) n.attrs["data-cutout-id"] = e.provenance.cutout_id;
}

XmlNode element_node(const SceneGraph& board, const Element& e, XmlNode& defs) {
  XmlNode n{"path", {}, {}};
  n.attrs["id"] = e.id;
  n.attrs["transform"] = matrix_attr(e.transform);
  n.attrs["fill"] = e.fill == Fill::Foreground ? "#000000" : "none";
  n.attrs["fill-rule"] = "evenodd";
  provenance_attrs(n, e);
  std::string d;
  append_rings(d, e.path, Affine::Identity());
  if (!e.holes.empty()) {
    std::string ids;
    for (const auto& h : e.holes) {
      const Element& hole = board.element(h);
      append_rings(d, hole.path, hole.transform);
      ids += (ids.empty() ? "" : " ") + h;

      XmlNode src{"path", {}, {}};
      src.attrs["id"] = hole.id;
      src.attrs["transform"] = matrix_attr(hole.transform);
      src.attrs["fill"] = "none";
      src.attrs["data-target"] = e.id;
      provenance_attrs(src, hole);
      std::string hd;
      append_rings(hd, hole.path, Affine::Identity());
      src.attrs["d"] = hd;
      defs.children.push_back(std::move(src));
    }
    n.attrs["data-holes"] = ids;
    n.attrs["data-own-subpaths"] = std::to_string(e.path.subpaths.size());
  }
  n.attrs["d"] = d;
  return n;
}

XmlNode build(const SceneGraph& board, const std::string& id, XmlNode& defs) {
  const Node& node = board.node(id);
  if (const auto* e = std::get_if<Element>(&node)) return element_node(board, *e, defs);
  const auto& g = std::get<Group>(node);
  XmlNode n{"g", {{"id", g.id}, {"transform", matrix_attr(g.transform)}}, {}};
  for (const auto& c : g.children) n.children.push_back(build(board, c, defs));
  return n;
}

}  // namespace

std::string export_svg(const SceneGraph& board, const ExportOptions& opts) {
  if (!(opts.scale > 0) || !std::isfinite(opts.scale)) fail(ErrorCode::InvalidArgument, "scale must be positive");
  const auto problems = check_invariants(board);
  if (!problems.empty()) fail(ErrorCode::InvalidArgument, "board violates invariants: " + problems.front());

  const std::string w = format_matrix_entry(board.canvas_width);
  const std::string h = format_matrix_entry(board.canvas_height);
  XmlNode svg{"svg", {}, {}};
  svg.attrs["xmlns"] = std::string(kSvgNs);
  svg.attrs["version"] = "1.1";
  svg.attrs["viewBox"] = "0 0 " + w + " " + h;
  svg.attrs["width"] = format_matrix_entry(board.canvas_width * opts.scale) + "mm";
  svg.attrs["height"] = format_matrix_entry(board.canvas_height * opts.scale) + "mm";
  svg.attrs["data-profile"] = std::string(kProfile);
  svg.attrs["data-scale"] = format_matrix_entry(opts.scale);
  svg.attrs["data-next-id"] = std::to_string(board.next_id);

  XmlNode defs{"defs", {}, {}};
  XmlNode canvas{"g", {{"id", "canvas"}}, {}};
  for (const auto& r : board.roots) canvas.children.push_back(build(board, r, defs));
  svg.children.push_back(std::move(defs));
  svg.children.push_back(std::move(canvas));

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  write(os, svg, 0);
  return os.str();
}

// --- reader -----------------------------------------------------------------------

namespace {

using boost::property_tree::ptree;

[[noreturn]] void unsupported(const std::string& what) { fail(ErrorCode::UnsupportedFeature, what); }
[[noreturn]] void malformed(const std::string& what) { fail(ErrorCode::ParseError, what); }

using Attrs = std::map<std::string, std::string>;

/// Attributes of an element, rejecting any outside `allowed`; also rejects
/// text content.
Attrs attributes(const ptree& node, const std::string& tag, const std::set<std::string>& allowed) {
  Attrs out;
  if (!text::trim(node.data()).empty()) unsupported("text content in <" + tag + ">");
  if (auto a = node.get_child_optional("<xmlattr>")) {
    for (const auto& [k, v] : *a) {
      if (!allowed.count(k)) unsupported("attribute " + k + " on <" + tag + ">");
      out[k] = v.data();
    }
  }
  return out;
}

std::optional<std::string> get(const Attrs& a, const std::string& k) {
  auto it = a.find(k);
  if (it == a.end()) return std::nullopt;
  return it->second;
}

double parse_number(std::string_view s) {
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    malformed("bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split_numbers(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == ',' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Affine parse_transform(const std::optional<std::string>& attr) {
  if (!attr) return Affine::Identity();
  const std::string t = text::trim(*attr);
  if (t.rfind("matrix(", 0) != 0 || t.back() != ')') unsupported("transform other than matrix(): " + t);
  const auto parts = split_numbers(std::string_view(t).substr(7, t.size() - 8));
  if (parts.size() != 6) malformed("matrix() needs six numbers");
  Affine m;
  m(0, 0) = parse_number(parts[0]);
  m(1, 0) = parse_number(parts[1]);
  m(0, 1) = parse_number(parts[2]);
  m(1, 1) = parse_number(parts[3]);
  m(0, 2) = parse_number(parts[4]);
  m(1, 2) = parse_number(parts[5]);
  return m;
}

/// Absolute M/L/Z polygons only.
pattern::VectorPath parse_d(const std::string& d) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
  };
  for (char c : d) {
    if (std::isalpha(static_cast<unsigned char>(c)) && c != 'e' && c != 'E') {
      flush();
      tokens.emplace_back(1, c);
    } else if (c == ' ' || c == ',' || c == '\t' || c == '\n' || c == '\r') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();

  pattern::VectorPath path;
  pattern::Ring ring;
  char cmd = 0;
  for (std::size_t i = 0; i < tokens.size();) {
    const std::string& t = tokens[i];
    if (t.size() == 1 && std::isalpha(static_cast<unsigned char>(t[0]))) {
      cmd = t[0];
      ++i;
      if (cmd != 'M' && cmd != 'L' && cmd != 'Z') unsupported(std::string("path command ") + cmd);
      if (cmd == 'Z') {
        if (ring.size() < 3) malformed("subpath with fewer than three vertices");
        ring.push_back(ring.front());
        path.subpaths.push_back(std::move(ring));
        ring.clear();
        cmd = 0;
      } else if (cmd == 'M' && !ring.empty()) {
        unsupported("open subpath");
      }
      continue;
    }
    if (cmd != 'M' && cmd != 'L') malformed("coordinates without a command");
    if (i + 1 >= tokens.size()) malformed("odd coordinate count");
    const double x = parse_number(tokens[i]);
    const double y = parse_number(tokens[i + 1]);
    ring.emplace_back(snap(x), snap(y));
    i += 2;
  }
  if (!ring.empty()) unsupported("open subpath");
  if (path.subpaths.empty()) malformed("empty path");
  return path;
}

const std::set<std::string> kPathAttrs = {"id",          "d",           "transform",      "fill",
                                          "fill-rule",   "data-kind",   "data-source",    "data-work-id",
                                          "data-cutout-id", "data-holes", "data-own-subpaths", "data-target"};

struct Reader {
  SceneGraph board;
  std::map<std::string, Element> hole_defs;  // id -> element, transform relative to target
  std::map<std::string, std::string> hole_target;

  std::string take_id(const Attrs& a) {
    if (auto id = get(a, "id")) {
      if (!valid_id(*id)) malformed("invalid id " + *id);
      if (board.contains(*id) || hole_defs.count(*id)) malformed("duplicate id " + *id);
      return *id;
    }
    for (;;) {
      std::string id = "n" + std::to_string(board.next_id++);
      if (!board.contains(id) && !hole_defs.count(id)) return id;
    }
  }

  Element path_element(const ptree& node) {
    const Attrs a = attributes(node, "path", kPathAttrs);
    if (!node.empty() && !(node.size() == 1 && node.front().first == "<xmlattr>")) unsupported("children of <path>");
    Element e;
    e.id = take_id(a);
    const auto d = get(a, "d");
    if (!d) malformed("path without d");
    e.path = parse_d(*d);
    e.transform = parse_transform(get(a, "transform"));
    const std::string fill = get(a, "fill").value_or("#000000");
    if (fill == "#000000" || fill == "black") e.fill = Fill::Foreground;
    else if (fill == "none") e.fill = Fill::Hole;
    else unsupported("fill " + fill);
    if (auto rule = get(a, "fill-rule"); rule && *rule != "evenodd") unsupported("fill-rule " + *rule);
    try {
      if (auto k = get(a, "data-kind")) e.kind = parse_kind(*k);
      if (auto s = get(a, "data-source")) e.provenance.source = parse_source(*s);
    } catch (const Error& err) {
      malformed(err.what());
    }
    e.provenance.work_id = get(a, "data-work-id").value_or("");
    e.provenance.cutout_id = get(a, "data-cutout-id").value_or("");
    if (e.kind == ElementKind::Cutout && e.fill != Fill::Hole) malformed("cutout " + e.id + " must have fill none");

    if (auto holes = get(a, "data-holes")) {
      e.holes = split_numbers(*holes);
      const auto own = get(a, "data-own-subpaths");
      if (!own) malformed("data-holes without data-own-subpaths");
      const double k = parse_number(*own);
      if (k < 1 || k != std::floor(k) || k > static_cast<double>(e.path.subpaths.size()))
        malformed("bad data-own-subpaths");
      e.path.subpaths.resize(static_cast<std::size_t>(k));
    } else if (get(a, "data-own-subpaths")) {
      malformed("data-own-subpaths without data-holes");
    }
    if (get(a, "data-target")) malformed("data-target outside <defs>");
    return e;
  }

  std::string content(const std::string& tag, const ptree& node) {
    if (tag == "path") {
      Element e = path_element(node);
      const std::string id = e.id;
      board.nodes.emplace(id, std::move(e));
      return id;
    }
    if (tag == "g") {
      const Attrs a = attributes(node, "g", {"id", "transform"});
      Group g;
      g.id = take_id(a);
      g.transform = parse_transform(get(a, "transform"));
      const std::string gid = g.id;
      board.nodes.emplace(gid, g);
      std::vector<std::string> kids;
      for (const auto& [ctag, child] : node) {
        if (ctag == "<xmlattr>" || ctag == "<xmlcomment>") continue;
        kids.push_back(content(ctag, child));
      }
      std::get<Group>(board.nodes.at(gid)).children = std::move(kids);
      return gid;
    }
    unsupported("element <" + tag + ">");
  }

  void defs(const ptree& node) {
    attributes(node, "defs", {});
    for (const auto& [tag, child] : node) {
      if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
      if (tag != "path") unsupported("<" + tag + "> in <defs>");
      const Attrs a = attributes(child, "path", kPathAttrs);
      const auto target = get(a, "data-target");
      if (!target) unsupported("<defs> path without data-target");
      ptree stripped = child;
      stripped.get_child("<xmlattr>").erase("data-target");
      Element e = path_element(stripped);
      if (e.kind != ElementKind::Cutout) malformed("hole " + e.id + " is not a cutout");
      hole_target[e.id] = *target;
      hole_defs.emplace(e.id, std::move(e));
    }
  }
};

}  // namespace

SceneGraph import_svg(const std::string& document) {
  ptree tree;
  try {
    std::istringstream in(document);
    boost::property_tree::read_xml(in, tree, boost::property_tree::xml_parser::trim_whitespace);
  } catch (const boost::property_tree::xml_parser_error& e) {
    fail(ErrorCode::ParseError, std::string("not well-formed XML: ") + e.what());
  }
  const ptree* svg = nullptr;
  for (const auto& [tag, child] : tree) {
    if (tag == "<xmlcomment>") continue;
    if (tag != "svg" || svg) unsupported("document root must be a single <svg>");
    svg = &child;
  }
  if (!svg) unsupported("document root must be a single <svg>");

  const Attrs a = attributes(*svg, "svg",
                             {"xmlns", "version", "width", "height", "viewBox", "data-profile", "data-scale",
                              "data-next-id"});
  if (get(a, "xmlns").value_or("") != kSvgNs) unsupported("missing SVG namespace");
  if (auto p = get(a, "data-profile"); p && *p != kProfile) unsupported("profile " + *p);

  Reader r;
  const auto vb = get(a, "viewBox");
  if (!vb) unsupported("missing viewBox");
  const auto box = split_numbers(*vb);
  if (box.size() != 4) malformed("viewBox needs four numbers");
  if (parse_number(box[0]) != 0 || parse_number(box[1]) != 0) unsupported("viewBox origin other than 0 0");
  r.board.canvas_width = parse_number(box[2]);
  r.board.canvas_height = parse_number(box[3]);
  if (!(r.board.canvas_width > 0) || !(r.board.canvas_height > 0)) malformed("empty canvas");
  if (auto n = get(a, "data-next-id")) {
    const double v = parse_number(*n);
    if (v < 1 || v != std::floor(v) || v > 1e15) malformed("bad data-next-id");
    r.board.next_id = static_cast<std::size_t>(v);
  }

  std::vector<std::pair<std::string, const ptree*>> body;
  bool seen_defs = false;
  for (const auto& [tag, child] : *svg) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
    if (tag == "defs") {
      if (seen_defs) unsupported("more than one <defs>");
      seen_defs = true;
      r.defs(child);
    } else {
      body.emplace_back(tag, &child);
    }
  }
  // The canonical wrapper <g id="canvas"> is the root list itself.
  if (body.size() == 1 && body.front().first == "g" &&
      body.front().second->get_optional<std::string>("<xmlattr>.id") == std::string("canvas")) {
    const ptree& canvas = *body.front().second;
    attributes(canvas, "g", {"id"});
    body.clear();
    for (const auto& [tag, child] : canvas) {
      if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
      body.emplace_back(tag, &child);
    }
  }
  for (const auto& [tag, child] : body) r.board.roots.push_back(r.content(tag, *child));

  for (auto& [id, hole] : r.hole_defs) {
    const std::string& target = r.hole_target.at(id);
    auto it = r.board.nodes.find(target);
    const auto* te = it == r.board.nodes.end() ? nullptr : std::get_if<Element>(&it->second);
    if (!te || std::find(te->holes.begin(), te->holes.end(), id) == te->holes.end())
      malformed("hole " + id + " does not match its target " + target);
    r.board.nodes.emplace(id, std::move(hole));
  }
  const auto problems = check_invariants(r.board);
  if (!problems.empty()) malformed("inconsistent document: " + problems.front());
  return r.board;
}

}  // namespace cutstudio::moodboard
