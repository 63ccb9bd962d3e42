#include <fstream>
#include <regex>

#include <doctest.h>

#include "boards.hpp"
#include "cutstudio/moodboard.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cutstudio;
using namespace cutstudio::moodboard;
using support::code_of;

namespace {

Element rect(const std::string& id, double x, double y, double w, double h, ElementKind kind = ElementKind::Contour) {
  Element e;
  e.id = id;
  e.path.subpaths.push_back(boards::square_ring(x, y, w, h));
  e.kind = kind;
  e.fill = kind == ElementKind::Cutout ? Fill::Hole : Fill::Foreground;
  return e;
}

double max_diff(const Affine& a, const Affine& b) { return (a - b).cwiseAbs().maxCoeff(); }

std::map<std::string, Affine> world_transforms(const SceneGraph& b) {
  std::map<std::string, Affine> out;
  for (const auto& [id, n] : b.nodes)
    if (std::holds_alternative<Element>(n)) out[id] = b.world_transform(id);
  return out;
}

/// Rings of the `d` attribute of the path with `id` in an exported document.
pattern::VectorPath exported_rings(const std::string& svg, const std::string& id) {
  const std::regex tag("<path [^>]*id=\"" + id + "\"[^>]*>");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, tag));
  const std::string t = m.str();
  const auto at = t.find(" d=\"");
  const std::string d = t.substr(at + 4, t.find('"', at + 4) - at - 4);
  pattern::VectorPath path;
  std::istringstream in(d);
  std::string tok;
  pattern::Ring ring;
  while (in >> tok) {
    if (tok == "Z") {
      ring.push_back(ring.front());
      path.subpaths.push_back(ring);
      ring.clear();
    } else if (tok == "M" || tok == "L") {
      double x, y;
      in >> x >> y;
      ring.emplace_back(x, y);
    }
  }
  return path;
}

}  // namespace

TEST_CASE("affine helpers") {
  const Affine r = rotation(90);
  CHECK(r(0, 0) == 0);
  CHECK(r(0, 1) == -1);
  CHECK(r(1, 0) == 1);
  Affine acc = Affine::Identity();
  for (int i = 0; i < 4; ++i) acc = compose(r, acc);
  CHECK(acc == Affine::Identity());
  Affine t = compose(translation(3, -2), compose(rotation(33), scaling(2, 0.5)));
  CHECK(max_diff(compose(inverse(t), t), Affine::Identity()) < 1e-12);
  CHECK(code_of([] { inverse(scaling(0, 1)); }) == ErrorCode::SingularTransform);
  const pattern::Point p = apply(translation(1, 2), pattern::Point(3, 4));
  CHECK(p == pattern::Point(4, 6));
}

TEST_CASE("number formats") {
  CHECK(format_coordinate(1.5) == "1.5");
  CHECK(format_coordinate(-0.00004) == "0");
  CHECK(format_coordinate(-2.25) == "-2.25");
  CHECK(format_coordinate(10) == "10");
  CHECK(format_coordinate(0.0001) == "0.0001");
  CHECK(format_coordinate(123.45678) == "123.4568");
  CHECK(format_matrix_entry(0.1) == "0.1");
  CHECK(format_matrix_entry(-0.0) == "0");
  CHECK(std::stod(format_matrix_entry(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(snap(1.23456) == 1.2346);
}

TEST_CASE("add element checks") {
  SceneGraph b;
  b = add_element(b, rect("a", 0, 0, 10, 10));
  CHECK(code_of([&] { add_element(b, rect("a", 0, 0, 5, 5)); }) == ErrorCode::DuplicateId);
  CHECK(code_of([&] { add_element(b, rect("canvas", 0, 0, 5, 5)); }) == ErrorCode::InvalidArgument);
  Element bad = rect("c", 0, 0, 5, 5, ElementKind::Cutout);
  bad.fill = Fill::Foreground;
  CHECK(code_of([&] { add_element(b, bad); }) == ErrorCode::InvalidArgument);
  Element singular = rect("s", 0, 0, 5, 5);
  singular.transform = scaling(0, 1);
  CHECK(code_of([&] { add_element(b, singular); }) == ErrorCode::SingularTransform);
  Element anon = rect("", 0.123456, 0, 5, 5);
  const SceneGraph b2 = add_element(b, anon);
  REQUIRE(b2.roots.size() == 2);
  CHECK(b2.roots.back() == "n1");
  CHECK(b2.element("n1").path.subpaths[0][0].x() == 0.1235);
  CHECK(b.roots.size() == 1);  // the input board is untouched
}

TEST_CASE("flips are exact involutions") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    Element e = rect("e", 0, 0, 10, 10);
    e.transform << u(rng), u(rng), u(rng), u(rng), u(rng), u(rng);
    if (std::abs(determinant(e.transform)) < 1e-3) continue;
    SceneGraph b = add_element({}, e);
    for (auto kind : {TransformKind::FlipH, TransformKind::FlipV}) {
      const SceneGraph once = apply_transform(b, "e", {kind});
      CHECK(once.element("e").transform != b.element("e").transform);
      const SceneGraph twice = apply_transform(once, "e", {kind});
      CHECK(twice.element("e").transform == b.element("e").transform);
      CHECK(export_svg(twice) == export_svg(b));
    }
  }
}

TEST_CASE("transform ops") {
  SceneGraph b = add_element({}, rect("e", 0, 0, 10, 10));
  b = apply_transform(b, "e", {TransformKind::Translate, 5, 7});
  b = apply_transform(b, "e", {TransformKind::Scale, 2, 2});
  // Left composition: the scale also scales the earlier translation.
  CHECK(b.element("e").transform(0, 2) == 10);
  CHECK(b.element("e").transform(1, 2) == 14);
  SceneGraph r = b;
  for (int i = 0; i < 4; ++i) r = apply_transform(r, "e", {TransformKind::Rotate, 90});
  CHECK(max_diff(r.element("e").transform, b.element("e").transform) < 1e-9);
  CHECK(code_of([&] { apply_transform(b, "e", {TransformKind::Scale, 0, 1}); }) == ErrorCode::SingularTransform);
  CHECK(code_of([&] { apply_transform(b, "zz", {TransformKind::FlipH}); }) == ErrorCode::UnknownId);
}

TEST_CASE("group and ungroup preserve world transforms") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    SceneGraph b = boards::random_history(1000 + trial, 60).current();
    if (b.roots.size() < 2) continue;
    const auto before = world_transforms(b);
    std::vector<std::string> ids = b.roots;
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(2);
    std::string gid;
    SceneGraph g = group(b, ids, &gid);
    CHECK(check_invariants(g).empty());
    g = apply_transform(g, gid, {TransformKind::Rotate, 37});
    g = apply_transform(g, gid, {TransformKind::Translate, 3.5, -2});
    g = apply_transform(g, gid, {TransformKind::Rotate, -37});
    g = apply_transform(g, gid, {TransformKind::Translate, -3.5, 2});
    // A group of moved members keeps the members' world transforms after
    // ungrouping, whatever the group transform was.
    const auto grouped = world_transforms(g);
    const SceneGraph u = ungroup(g, gid);
    CHECK(check_invariants(u).empty());
    const auto after = world_transforms(u);
    REQUIRE(after.size() == grouped.size());
    for (const auto& [id, w] : grouped) CHECK(max_diff(after.at(id), w) < 1e-9);
    // Identity group then ungroup gives back the same world transforms.
    const SceneGraph plain = ungroup(group(b, ids, &gid), gid);
    for (const auto& [id, w] : before) CHECK(max_diff(world_transforms(plain).at(id), w) < 1e-9);
  }
}

TEST_CASE("group rules") {
  SceneGraph b;
  b = add_element(b, rect("a", 0, 0, 10, 10));
  b = add_element(b, rect("b", 5, 5, 10, 10));
  b = add_element(b, rect("c", 50, 50, 10, 10));
  CHECK(code_of([&] { group(b, {"a"}); }) == ErrorCode::CrossParentGroup);
  CHECK(code_of([&] { group(b, {"a", "a"}); }) == ErrorCode::CrossParentGroup);
  CHECK(code_of([&] { group(b, {"a", "q"}); }) == ErrorCode::UnknownId);
  std::string gid;
  SceneGraph g = group(b, {"c", "a"}, &gid);
  CHECK(g.roots == std::vector<std::string>{gid, "b"});
  CHECK(g.group(gid).children == std::vector<std::string>{"a", "c"});
  CHECK(code_of([&] { group(g, {"a", "b"}); }) == ErrorCode::CrossParentGroup);
  CHECK(code_of([&] { ungroup(g, "a"); }) == ErrorCode::NotAGroup);
  CHECK(ungroup(g, gid).roots == std::vector<std::string>{"a", "c", "b"});
}

TEST_CASE("duplicate copies deeply above the source") {
  SceneGraph b;
  b = add_element(b, rect("a", 0, 0, 40, 40));
  b = add_element(b, rect("h", 10, 10, 5, 5, ElementKind::Cutout));
  b = add_element(b, rect("top", 100, 100, 5, 5));
  b = apply_cutout(b, "h", "a");
  std::string gid, dup;
  b = group(b, {"a", "top"}, &gid);
  b = duplicate(b, gid, &dup);
  CHECK(b.roots == std::vector<std::string>{gid, dup});
  CHECK(check_invariants(b).empty());
  const auto& kids = b.group(dup).children;
  REQUIRE(kids.size() == 2);
  CHECK(kids[0] != "a");
  CHECK(b.element(kids[0]).holes.size() == 1);
  CHECK(b.element(kids[0]).holes[0] != "h");
  CHECK(b.nodes.size() == 8);
}

TEST_CASE("apply cutout") {
  SceneGraph b;
  b = add_element(b, rect("t", 0, 0, 40, 40));
  b = add_element(b, rect("c", 10, 10, 8, 8, ElementKind::Cutout));
  b = add_element(b, rect("far", 500, 500, 8, 8, ElementKind::Cutout));
  b = apply_transform(b, "t", {TransformKind::Translate, 20, 0});
  b = apply_transform(b, "c", {TransformKind::Translate, 22, 3});
  CHECK(code_of([&] { apply_cutout(b, "t", "c"); }) == ErrorCode::NotACutout);
  CHECK(code_of([&] { apply_cutout(b, "far", "t"); }) == ErrorCode::NoOverlap);
  CHECK(code_of([&] { apply_cutout(b, "c", "nope"); }) == ErrorCode::UnknownId);
  CHECK(code_of([&] { apply_cutout(b, "c", "far"); }) == ErrorCode::InvalidArgument);

  const Affine world = b.world_transform("c");
  SceneGraph a = apply_cutout(b, "c", "t");
  CHECK(a.roots == std::vector<std::string>{"t", "far"});
  CHECK(a.element("t").holes == std::vector<std::string>{"c"});
  CHECK(max_diff(a.world_transform("c"), world) < 1e-12);
  // The hole travels with its target.
  SceneGraph moved = apply_transform(a, "t", {TransformKind::Translate, 0, 100});
  CHECK(max_diff(moved.world_transform("c"), compose(translation(0, 100), world)) < 1e-12);
  CHECK(check_invariants(moved).empty());
}

TEST_CASE("export merges holes under even-odd fill") {
  SceneGraph b;
  b.canvas_width = 64;
  b.canvas_height = 64;
  b = add_element(b, rect("t", 4, 4, 40, 30));
  b = add_element(b, rect("c", 10, 10, 8, 6, ElementKind::Cutout));
  b = apply_transform(b, "c", {TransformKind::Translate, 6, 2});
  b = apply_cutout(b, "c", "t");
  const std::string svg = export_svg(b);
  CHECK(svg.find("fill-rule=\"evenodd\"") != std::string::npos);
  CHECK(svg.find("<defs>") != std::string::npos);
  CHECK(svg.find("<g id=\"canvas\">") != std::string::npos);
  const auto rings = exported_rings(svg, "t");
  REQUIRE(rings.subpaths.size() == 2);
  // Pixel-center fill of the merged path equals the rectangle minus the
  // translated hole.
  const BinaryImage got = oracle::rasterize(rings, 64, 64);
  BinaryImage want(64, 64, false);
  for (int y = 4; y < 34; ++y)
    for (int x = 4; x < 44; ++x) want.set(x, y, !(x >= 16 && x < 24 && y >= 12 && y < 18));
  CHECK(oracle::mismatches(got, want) == 0);
}

TEST_CASE("export is canonical") {
  const std::string empty = export_svg({});
  CHECK(empty.rfind("<?xml", 0) == 0);
  CHECK(empty.find("<svg data-next-id=\"1\" data-profile=\"cutstudio-svg-1\" data-scale=\"1\" height=\"1000mm\" "
                   "version=\"1.1\" viewBox=\"0 0 1000 1000\" width=\"1000mm\" "
                   "xmlns=\"http://www.w3.org/2000/svg\">") != std::string::npos);
  CHECK(import_svg(empty).nodes.empty());

  ExportOptions opts;
  opts.scale = 0.5;
  CHECK(export_svg({}, opts).find("width=\"500mm\"") != std::string::npos);

  // Attributes appear in sorted order on every element.
  const SceneGraph b = boards::random_history(3, 80).current();
  const std::string svg = export_svg(b);
  const std::regex attr_re(R"re( ([a-zA-Z:-]+)=")re");
  std::istringstream lines(svg);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("<?xml", 0) == 0) continue;
    std::vector<std::string> names;
    for (std::sregex_iterator it(line.begin(), line.end(), attr_re), end; it != end; ++it) names.push_back((*it)[1]);
    CHECK(std::is_sorted(names.begin(), names.end()));
  }
}

TEST_CASE("export import export is byte stable") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SceneGraph b = boards::random_history(seed, 150).current();
    const std::string first = export_svg(b);
    const SceneGraph back = import_svg(first);
    CHECK(check_invariants(back).empty());
    CHECK(export_svg(back) == first);
    CHECK(to_json(back) == to_json(b));
  }
}

TEST_CASE("import rejects documents outside the profile") {
  const std::string head = R"(<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 100 100">)";
  auto doc = [&](const std::string& body) { return head + body + "</svg>"; };
  const std::string ok = R"(<path d="M 0 0 L 10 0 L 10 10 Z"/>)";
  CHECK(import_svg(doc(ok)).roots.size() == 1);
  CHECK(import_svg(doc("<g>" + ok + ok + "</g>")).nodes.size() == 3);

  const std::vector<std::string> unsupported = {
      R"(<circle cx="5" cy="5" r="3"/>)",
      R"(<path d="M 0 0 C 1 1 2 2 3 3 Z"/>)",
      R"(<path d="m 0 0 l 10 0 l 0 10 z"/>)",
      R"(<path d="M 0 0 L 10 0 L 10 10"/>)",
      R"d(<path d="M 0 0 L 10 0 L 10 10 Z" transform="rotate(45)"/>)d",
      R"(<path d="M 0 0 L 10 0 L 10 10 Z" style="fill:red"/>)",
      R"(<path d="M 0 0 L 10 0 L 10 10 Z" fill="red"/>)",
      R"(<path d="M 0 0 L 10 0 L 10 10 Z" fill-rule="nonzero"/>)",
      R"(<text>hi</text>)",
      R"(<g stroke="black"/>)",
  };
  for (const auto& body : unsupported) {
    CAPTURE(body);
    CHECK(code_of([&] { import_svg(doc(body)); }) == ErrorCode::UnsupportedFeature);
  }
  CHECK(code_of([&] { import_svg("<svg"); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { import_svg("<html/>"); }) == ErrorCode::UnsupportedFeature);
  CHECK(code_of([&] { import_svg(doc(R"(<path d="M 0 0 L 1.2.3 0 L 10 10 Z"/>)")); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { import_svg(doc(R"(<path id="a" d="M 0 0 L 1 0 L 1 1 Z"/><path id="a" d="M 0 0 L 1 0 L 1 1 Z"/>)")); }) ==
        ErrorCode::ParseError);
}

TEST_CASE("random op sequences keep forest invariants") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    BoardHistory h(SceneGraph{});
    int applied = 0, rejected = 0;
    for (int i = 0; i < 1000; ++i) {
      const BoardOp op = boards::random_op(rng, h.current());
      const std::string before = to_json(h.current()).dump();
      try {
        h.apply(op);
        ++applied;
      } catch (const Error&) {
        ++rejected;
        CHECK(to_json(h.current()).dump() == before);
      }
      const auto problems = check_invariants(h.current());
      if (!problems.empty()) {
        FAIL_CHECK("op " << i << " (" << op.op << "): " << problems.front());
        break;
      }
    }
    CHECK(applied > 500);
    MESSAGE("seed " << seed << ": " << applied << " applied, " << rejected << " rejected, "
                    << h.current().nodes.size() << " nodes");
  }
}

TEST_CASE("apply_op argument errors") {
  SceneGraph b = add_element({}, rect("a", 0, 0, 10, 10));
  CHECK(code_of([&] { apply_op(b, {"warp", nlohmann::json::object()}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { apply_op(b, {"transform", {{"id", "a"}}}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { apply_op(b, {"transform", {{"id", "a"}, {"transform", "scale"}, {"sx", "big"}}}); }) ==
        ErrorCode::InvalidArgument);
  CHECK(code_of([&] { apply_op(b, {"ungroup", {{"id", "a"}}}); }) == ErrorCode::NotAGroup);
  std::string created;
  apply_op(b, {"duplicate", {{"id", "a"}}}, &created);
  CHECK(created == "n1");
}

TEST_CASE("history undo and sessions") {
  support::TempDir dir;
  BoardHistory h = boards::random_history(9, 200);
  const auto log = h.log();
  REQUIRE(log.size() > 10);
  const std::string svg = export_svg(h.current());
  CHECK(export_svg(h.replay()) == svg);

  save_session(h, dir / "s.json", {{"intent", "spring"}});
  nlohmann::json extra;
  BoardHistory loaded = load_session(dir / "s.json", &extra);
  CHECK(extra["intent"] == "spring");
  CHECK(export_svg(loaded.current()) == svg);
  CHECK(loaded.log() == log);

  BoardHistory shorter = h;
  REQUIRE(shorter.undo());
  BoardHistory manual(h.initial());
  for (std::size_t i = 0; i + 1 < log.size(); ++i) manual.apply(log[i]);
  CHECK(export_svg(shorter.current()) == export_svg(manual.current()));
  CHECK(shorter.version() == h.version() + 1);
  CHECK_FALSE(BoardHistory{}.undo());

  {
    std::ofstream(dir / "junk.json") << "{not json";
  }
  CHECK(code_of([&] { load_session(dir / "junk.json"); }) == ErrorCode::CorruptSession);
  auto doc = nlohmann::json::parse(std::ifstream(dir / "s.json"));
  doc["history"]["board"]["next_id"] = 99999;
  std::ofstream(dir / "tampered.json") << doc.dump();
  CHECK(code_of([&] { load_session(dir / "tampered.json"); }) == ErrorCode::CorruptSession);
  doc = nlohmann::json::parse(std::ifstream(dir / "s.json"));
  doc["history"]["log"].push_back({{"op", "ungroup"}, {"args", {{"id", "missing"}}}});
  std::ofstream(dir / "badlog.json") << doc.dump();
  try {
    load_session(dir / "badlog.json");
    FAIL("expected CorruptSession");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptSession);
    CHECK(e.cause() == ErrorCode::UnknownId);
  }
  CHECK(code_of([&] { load_session(dir / "absent.json"); }) == ErrorCode::IoError);
}
