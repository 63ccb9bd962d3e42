#include <fstream>

#include "cutstudio/moodboard.hpp"

namespace cutstudio::moodboard {

using nlohmann::json;

namespace {

json matrix_json(const Affine& m) { return json::array({m(0, 0), m(1, 0), m(0, 1), m(1, 1), m(0, 2), m(1, 2)}); }

Affine matrix_from(const json& j) {
  if (!j.is_array() || j.size() != 6) fail(ErrorCode::SchemaError, "transform must be six numbers");
  Affine m;
  m(0, 0) = j.at(0).get<double>();
  m(1, 0) = j.at(1).get<double>();
  m(0, 1) = j.at(2).get<double>();
  m(1, 1) = j.at(3).get<double>();
  m(0, 2) = j.at(4).get<double>();
  m(1, 2) = j.at(5).get<double>();
  return m;
}

json path_json(const pattern::VectorPath& path) {
  json rings = json::array();
  for (const auto& ring : path.subpaths) {
    json pts = json::array();
    for (const auto& p : ring) pts.push_back(json::array({p.x(), p.y()}));
    rings.push_back(std::move(pts));
  }
  return rings;
}

pattern::VectorPath path_from(const json& j) {
  pattern::VectorPath path;
  for (const auto& ring : j) {
    pattern::Ring r;
    for (const auto& p : ring) {
      if (!p.is_array() || p.size() != 2) fail(ErrorCode::SchemaError, "point must be [x, y]");
      r.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
    path.subpaths.push_back(std::move(r));
  }
  return path;
}

/// Runs `fn`, turning JSON access failures into `code`.
template <typename F>
auto guarded(ErrorCode code, F&& fn) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(code, e.what());
  }
}

}  // namespace

json to_json(const Element& e) {
  json j = {{"type", "element"},
            {"id", e.id},
            {"kind", to_string(e.kind)},
            {"fill", to_string(e.fill)},
            {"transform", matrix_json(e.transform)},
            {"path", path_json(e.path)},
            {"provenance",
             {{"source", to_string(e.provenance.source)},
              {"work_id", e.provenance.work_id},
              {"cutout_id", e.provenance.cutout_id}}},
            {"holes", e.holes}};
  return j;
}

Element element_from_json(const json& j) {
  return guarded(ErrorCode::SchemaError, [&] {
    Element e;
    e.id = j.value("id", "");
    e.kind = parse_kind(j.value("kind", "contour"));
    e.fill = parse_fill(j.value("fill", e.kind == ElementKind::Cutout ? "hole" : "foreground"));
    if (j.contains("transform")) e.transform = matrix_from(j.at("transform"));
    e.path = path_from(j.at("path"));
    if (j.contains("provenance")) {
      const auto& p = j.at("provenance");
      e.provenance.source = parse_source(p.value("source", "extracted"));
      e.provenance.work_id = p.value("work_id", "");
      e.provenance.cutout_id = p.value("cutout_id", "");
    }
    if (j.contains("holes")) e.holes = j.at("holes").get<std::vector<std::string>>();
    return e;
  });
}

json to_json(const SceneGraph& board) {
  json nodes = json::object();
  for (const auto& [id, n] : board.nodes) {
    if (const auto* e = std::get_if<Element>(&n)) {
      nodes[id] = to_json(*e);
    } else {
      const auto& g = std::get<Group>(n);
      nodes[id] = {{"type", "group"}, {"id", g.id}, {"children", g.children}, {"transform", matrix_json(g.transform)}};
    }
  }
  return {{"canvas", {{"width", board.canvas_width}, {"height", board.canvas_height}}},
          {"next_id", board.next_id},
          {"roots", board.roots},
          {"nodes", std::move(nodes)}};
}

SceneGraph board_from_json(const json& j) {
  SceneGraph board = guarded(ErrorCode::SchemaError, [&] {
    SceneGraph b;
    b.canvas_width = j.at("canvas").at("width").get<double>();
    b.canvas_height = j.at("canvas").at("height").get<double>();
    b.next_id = j.at("next_id").get<std::size_t>();
    b.roots = j.at("roots").get<std::vector<std::string>>();
    for (const auto& [id, n] : j.at("nodes").items()) {
      const std::string type = n.at("type").get<std::string>();
      if (type == "element") {
        b.nodes.emplace(id, element_from_json(n));
      } else if (type == "group") {
        Group g;
        g.id = n.at("id").get<std::string>();
        g.children = n.at("children").get<std::vector<std::string>>();
        g.transform = matrix_from(n.at("transform"));
        b.nodes.emplace(id, std::move(g));
      } else {
        fail(ErrorCode::SchemaError, "unknown node type " + type);
      }
    }
    return b;
  });
  if (!(board.canvas_width > 0) || !(board.canvas_height > 0)) fail(ErrorCode::SchemaError, "empty canvas");
  const auto problems = check_invariants(board);
  if (!problems.empty()) fail(ErrorCode::SchemaError, "inconsistent board: " + problems.front());
  return board;
}

SceneGraph apply_op(SceneGraph board, const BoardOp& op, std::string* created_id) {
  const json& a = op.args;
  return guarded(ErrorCode::InvalidArgument, [&]() -> SceneGraph {
    if (!a.is_object()) fail(ErrorCode::InvalidArgument, "op arguments must be an object");
    if (op.op == "add") {
      const std::size_t before = board.roots.size();
      SceneGraph next = add_element(std::move(board), element_from_json(a.at("element")));
      if (created_id && next.roots.size() > before) *created_id = next.roots.back();
      return next;
    }
    if (op.op == "transform") {
      TransformOp t;
      t.kind = parse_transform_kind(a.at("transform").get<std::string>());
      switch (t.kind) {
        case TransformKind::Translate:
          t.x = a.value("dx", 0.0);
          t.y = a.value("dy", 0.0);
          break;
        case TransformKind::Scale:
          t.x = a.at("sx").get<double>();
          t.y = a.value("sy", t.x);
          break;
        case TransformKind::Rotate: t.x = a.at("degrees").get<double>(); break;
        default: break;
      }
      return apply_transform(std::move(board), a.at("id").get<std::string>(), t);
    }
    if (op.op == "group") return group(std::move(board), a.at("ids").get<std::vector<std::string>>(), created_id);
    if (op.op == "ungroup") return ungroup(std::move(board), a.at("id").get<std::string>());
    if (op.op == "duplicate") return duplicate(std::move(board), a.at("id").get<std::string>(), created_id);
    if (op.op == "apply_cutout")
      return apply_cutout(std::move(board), a.at("cutout_id").get<std::string>(), a.at("target_id").get<std::string>());
    if (op.op == "remove") return remove(std::move(board), a.at("id").get<std::string>());
    if (op.op == "reorder")
      return reorder(std::move(board), a.at("id").get<std::string>(), parse_zmove(a.at("to").get<std::string>()));
    fail(ErrorCode::InvalidArgument, "unknown board op: " + op.op);
  });
}

// --- history ----------------------------------------------------------------------

const SceneGraph& BoardHistory::apply(const BoardOp& op, std::string* created_id) {
  current_ = apply_op(current_, op, created_id);
  log_.push_back(op);
  ++version_;
  return current_;
}

bool BoardHistory::undo() {
  if (log_.empty()) return false;
  log_.pop_back();
  current_ = replay();
  ++version_;
  return true;
}

SceneGraph BoardHistory::replay() const {
  SceneGraph b = initial_;
  for (const auto& op : log_) b = apply_op(std::move(b), op);
  return b;
}

json BoardHistory::to_json() const {
  json log = json::array();
  for (const auto& op : log_) log.push_back({{"op", op.op}, {"args", op.args}});
  return {{"initial", moodboard::to_json(initial_)}, {"log", std::move(log)}, {"board", moodboard::to_json(current_)}};
}

BoardHistory BoardHistory::from_json(const json& j) {
  try {
    BoardHistory h(board_from_json(j.at("initial")));
    for (const auto& op : j.at("log")) h.log_.push_back({op.at("op").get<std::string>(), op.at("args")});
    h.current_ = h.replay();
    if (moodboard::to_json(h.current_) != j.at("board"))
      fail(ErrorCode::CorruptSession, "saved board differs from the replayed op log");
    h.version_ = h.log_.size();
    return h;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptSession) throw;
    throw Error(ErrorCode::CorruptSession, std::string("corrupt session: ") + e.what(), e.code());
  } catch (const std::exception& e) {
    fail(ErrorCode::CorruptSession, std::string("corrupt session: ") + e.what());
  }
}

void save_session(const BoardHistory& history, const std::filesystem::path& path, const json& extra) {
  const json doc = {{"schema", "cutstudio.session"}, {"version", 1}, {"history", history.to_json()}, {"extra", extra}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(1) << '\n';
    if (!out) fail(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::IoError, "cannot move session into place: " + ec.message());
}

BoardHistory load_session(const std::filesystem::path& path, json* extra) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const std::exception& e) {
    fail(ErrorCode::CorruptSession, std::string("session is not JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != "cutstudio.session" || doc.value("version", 0) != 1)
    fail(ErrorCode::CorruptSession, "not a version 1 session file");
  if (!doc.contains("history")) fail(ErrorCode::CorruptSession, "session has no history");
  BoardHistory h = BoardHistory::from_json(doc["history"]);
  if (extra) *extra = doc.value("extra", json::object());
  return h;
}

}  // namespace cutstudio::moodboard
