#include <charconv>
#include <fstream>

#include "cutstudio/studio.hpp"
#include "cutstudio/text.hpp"

namespace cutstudio::studio {

using nlohmann::json;

GeometryRef parse_geometry_ref(const std::string& ref) {
  GeometryRef out;
  const auto hash = ref.find('#');
  out.path = ref.substr(0, hash);
  if (hash == std::string::npos) return out;
  const std::string anchor = ref.substr(hash + 1);
  const auto comma = anchor.find(',');
  int x = 0, y = 0;
  auto parse = [](std::string_view s, int& v) {
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
  };
  if (comma == std::string::npos || !parse(std::string_view(anchor).substr(0, comma), x) ||
      !parse(std::string_view(anchor).substr(comma + 1), y))
    fail(ErrorCode::SchemaError, "bad geometry anchor in '" + ref + "'");
  out.anchor = Pixel{x, y};
  return out;
}

namespace {

const pattern::CutoutMask* cutout_at(const std::vector<pattern::CutoutMask>& cutouts, const Pixel& p) {
  for (const auto& c : cutouts)
    if (c.bbox.contains(p.x, p.y) && std::binary_search(c.pixels.begin(), c.pixels.end(), p)) return &c;
  return nullptr;
}

}  // namespace

std::vector<pattern::LabeledDescriptor> pattern_exemplars(const kb::KnowledgeBase& kb,
                                                          const std::filesystem::path& data_dir) {
  std::map<std::string, std::vector<pattern::CutoutMask>> by_image;
  std::vector<pattern::LabeledDescriptor> out;
  for (const auto& a : kb.pattern_annotations()) {
    const GeometryRef g = parse_geometry_ref(a.geometry_ref);
    if (!g.anchor) continue;
    auto it = by_image.find(g.path);
    if (it == by_image.end()) {
      const auto fg = pattern::binarize(image_io::read_gray(data_dir / g.path));
      it = by_image.emplace(g.path, pattern::extract_cutouts(fg)).first;
    }
    const auto* c = cutout_at(it->second, *g.anchor);
    if (!c) continue;
    out.push_back({pattern::compute_descriptors(*c), a.subcategory, a.pattern_name});
  }
  return out;
}

WorkPatterns extract_work_patterns(const kb::KnowledgeBase& kb, const std::filesystem::path& data_dir,
                                   const std::string& work_id,
                                   const std::vector<pattern::LabeledDescriptor>& exemplars, std::size_t k) {
  const auto* work = kb.find_work(work_id);
  if (!work) fail(ErrorCode::UnknownId, "no work '" + work_id + "'");
  std::vector<std::pair<Pixel, const kb::PatternAnnotation*>> anchors;
  for (const auto& a : kb.pattern_annotations()) {
    if (a.work_id != work_id) continue;
    const GeometryRef g = parse_geometry_ref(a.geometry_ref);
    if (g.anchor) anchors.emplace_back(*g.anchor, &a);
  }
  return extract_image_patterns(image_io::read_gray(data_dir / work->image_ref), work_id, exemplars, k, anchors);
}

WorkPatterns extract_image_patterns(const GrayImage& img, const std::string& work_id,
                                    const std::vector<pattern::LabeledDescriptor>& exemplars, std::size_t k,
                                    const std::vector<std::pair<Pixel, const kb::PatternAnnotation*>>& anchors) {
  WorkPatterns wp;
  wp.work_id = work_id;
  wp.width = static_cast<int>(img.cols());
  wp.height = static_cast<int>(img.rows());
  wp.threshold = pattern::otsu_threshold(img);
  const BinaryImage fg = pattern::binarize(img);
  const auto cutouts = pattern::extract_cutouts(fg, pattern::kDefaultMinCutoutArea, work_id + "-c");
  for (const auto& c : cutouts) {
    CutoutRecord r;
    r.cutout = c;
    r.path = pattern::vectorize(c);
    r.descriptor = pattern::compute_descriptors(c);
    if (exemplars.size() >= k && k > 0) r.classification = pattern::classify_unit_pattern(r.descriptor, exemplars, k);
    r.sawtooth = pattern::detect_sawtooth(c.mask());
    for (const auto& [p, a] : anchors)
      if (c.bbox.contains(p.x, p.y) && std::binary_search(c.pixels.begin(), c.pixels.end(), p)) r.annotation = a;
    wp.cutouts.push_back(std::move(r));
  }
  return wp;
}

namespace {

json path_json(const pattern::VectorPath& path) {
  json rings = json::array();
  for (const auto& ring : path.subpaths) {
    json pts = json::array();
    for (const auto& p : ring) pts.push_back({p.x(), p.y()});
    rings.push_back(std::move(pts));
  }
  return rings;
}

}  // namespace

json manifest_json(const WorkPatterns& wp, const std::string& mask_dir) {
  json cutouts = json::array();
  for (const auto& r : wp.cutouts) {
    const auto& c = r.cutout;
    json e = {{"cutout_id", c.cutout_id},
              {"bbox", {{"x", c.bbox.x}, {"y", c.bbox.y}, {"w", c.bbox.w}, {"h", c.bbox.h}}},
              {"area", c.area},
              {"parent_component", c.parent_component},
              {"vertex_count", r.path.vertex_count()},
              {"path", path_json(r.path)},
              {"descriptor",
               {{"area_norm", r.descriptor.area_norm},
                {"perimeter_norm", r.descriptor.perimeter_norm},
                {"circularity", r.descriptor.circularity}}},
              {"sawtooth", {{"score", r.sawtooth.score}, {"is_sawtooth", r.sawtooth.is_sawtooth}}}};
    if (r.classification)
      e["classification"] = {{"subcategory", kb::subcategory_name(r.classification->subcategory)},
                             {"pattern_name", r.classification->pattern_name},
                             {"confidence", r.classification->confidence}};
    else
      e["classification"] = nullptr;
    if (r.annotation)
      e["annotation"] = {{"cutout_id", r.annotation->cutout_id},
                         {"subcategory", kb::subcategory_name(r.annotation->subcategory)},
                         {"pattern_name", r.annotation->pattern_name}};
    if (!mask_dir.empty()) e["mask_ref"] = mask_dir + "/" + c.cutout_id + ".pbm";
    cutouts.push_back(std::move(e));
  }
  return {{"work_id", wp.work_id},
          {"width", wp.width},
          {"height", wp.height},
          {"threshold", wp.threshold},
          {"cutout_count", wp.cutouts.size()},
          {"cutouts", std::move(cutouts)}};
}

std::vector<retrieval::IndexItem> index_items(const kb::KnowledgeBase& kb, const std::filesystem::path& data_dir) {
  std::vector<retrieval::IndexItem> items;
  for (const auto& w : kb.works()) {
    retrieval::IndexItem item;
    item.id = w.work_id;
    item.image_ref = (data_dir / w.image_ref).string();
    item.metadata = {{"title", w.title}, {"region", std::string(kb::region_name(w.region))}, {"caption", w.title}};
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<retrieval::QueryPair> load_queries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::vector<retrieval::QueryPair> out;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      fail(ErrorCode::SchemaError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!header) {
      if (j.value("schema", "") != "cutstudio.queries" || j.value("version", 0) != 1)
        fail(ErrorCode::SchemaError, path.string() + ": missing cutstudio.queries v1 header");
      header = true;
      continue;
    }
    if (!j.contains("query_text") || !j.contains("gt_id") || !j["query_text"].is_string() || !j["gt_id"].is_string())
      fail(ErrorCode::SchemaError, path.string() + ":" + std::to_string(lineno) + ": need query_text and gt_id");
    out.push_back({j["query_text"].get<std::string>(), j["gt_id"].get<std::string>()});
  }
  if (!header) fail(ErrorCode::SchemaError, path.string() + ": empty query file");
  return out;
}

}  // namespace cutstudio::studio
