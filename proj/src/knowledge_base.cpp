#include "cutstudio/knowledge_base.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cutstudio/error.hpp"
#include "cutstudio/text.hpp"

namespace cutstudio::kb {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kRegionNames = {
    "Central China", "East China", "North China", "Northeast",
    "Northwest",     "South China", "Southwest"};

constexpr std::array<std::string_view, 5> kSubcategoryNames = {
    "Geometric Unit", "Semantic Unit", "Sawtooth", "Primary Composite", "Decorative Composite"};

constexpr int kTaxonomyVersion = 1;
constexpr int kRecordVersion = 1;

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  fail(ErrorCode::SchemaError, where + ": " + what);
}

std::string req_string(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) schema_error(where, std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

std::vector<std::string> opt_strings(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return {};
  if (!it->is_array()) schema_error(where, std::string("field '") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) schema_error(where, std::string("field '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorCode::IoError, "cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    schema_error(p.filename().string(), e.what());
  }
}

/// Reads a line-delimited record file. The first non-blank line is the header
/// {"schema": <name>, "version": 1}.
std::vector<json> read_records(const std::filesystem::path& p, std::string_view schema) {
  std::ifstream in(p);
  if (!in) fail(ErrorCode::IoError, "cannot open " + p.string());
  std::vector<json> out;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  const std::string file = p.filename().string();
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      schema_error(file + ":" + std::to_string(lineno), e.what());
    }
    if (!j.is_object()) schema_error(file + ":" + std::to_string(lineno), "record must be an object");
    if (!header_seen) {
      if (j.value("schema", "") != schema)
        schema_error(file, "header must declare schema '" + std::string(schema) + "'");
      if (j.value("version", 0) != kRecordVersion)
        schema_error(file, "unsupported schema version");
      header_seen = true;
      continue;
    }
    j["__where"] = file + ":" + std::to_string(lineno);
    out.push_back(std::move(j));
  }
  if (!header_seen) schema_error(file, "missing schema header");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view region_name(Region r) { return kRegionNames[static_cast<std::size_t>(r)]; }

std::optional<Region> parse_region(std::string_view name) {
  for (std::size_t i = 0; i < kRegionNames.size(); ++i)
    if (kRegionNames[i] == name) return static_cast<Region>(i);
  return std::nullopt;
}

std::string_view category_name(PatternCategory c) {
  return c == PatternCategory::Unit ? "Unit Pattern" : "Composite Pattern";
}

std::string_view subcategory_name(PatternSubcategory s) {
  return kSubcategoryNames[static_cast<std::size_t>(s)];
}

std::optional<PatternSubcategory> parse_subcategory(std::string_view name) {
  for (std::size_t i = 0; i < kSubcategoryNames.size(); ++i)
    if (kSubcategoryNames[i] == name) return static_cast<PatternSubcategory>(i);
  return std::nullopt;
}

PatternCategory category_of(PatternSubcategory s) {
  switch (s) {
    case PatternSubcategory::GeometricUnit:
    case PatternSubcategory::SemanticUnit:
    case PatternSubcategory::Sawtooth:
      return PatternCategory::Unit;
    default:
      return PatternCategory::Composite;
  }
}

std::size_t expected_lexicon_count(PatternSubcategory s) {
  switch (s) {
    case PatternSubcategory::GeometricUnit: return 8;
    case PatternSubcategory::SemanticUnit: return 12;
    case PatternSubcategory::Sawtooth: return 5;
    case PatternSubcategory::PrimaryComposite: return 34;
    case PatternSubcategory::DecorativeComposite: return 8;
  }
  return 0;
}

std::string_view to_string(SuggestionKind k) { return k == SuggestionKind::Object ? "object" : "pattern"; }

const FactorType* IdeationFactor::find_type(std::string_view type_name) const {
  for (const auto& t : types)
    if (t.name == type_name) return &t;
  return nullptr;
}

const IdeationFactor* FactorTaxonomy::find(std::string_view factor_name) const {
  for (const auto& f : factors)
    if (f.name == factor_name) return &f;
  return nullptr;
}

std::size_t FactorTaxonomy::type_count() const {
  std::size_t n = 0;
  for (const auto& f : factors) n += f.types.size();
  return n;
}

const LexiconEntry* PatternTaxonomy::find(std::string_view name) const {
  for (const auto& e : lexicon)
    if (e.name == name) return &e;
  return nullptr;
}

std::size_t PatternTaxonomy::count(PatternSubcategory s) const {
  return static_cast<std::size_t>(std::count_if(lexicon.begin(), lexicon.end(),
                                                [s](const auto& e) { return e.subcategory == s; }));
}

std::size_t PatternTaxonomy::count(PatternCategory c) const {
  return static_cast<std::size_t>(std::count_if(
      lexicon.begin(), lexicon.end(), [c](const auto& e) { return category_of(e.subcategory) == c; }));
}

const FactorAssignment* WorkAnnotation::assignment(std::string_view factor) const {
  for (const auto& a : assignments)
    if (a.factor == factor) return &a;
  return nullptr;
}

std::string Violation::describe() const {
  switch (kind) {
    case Kind::MissingFactor: return "MissingFactor(" + factor + ")";
    case Kind::DuplicateFactor: return "DuplicateFactor(" + factor + ")";
    case Kind::UnknownFactor: return "UnknownFactor(" + factor + ")";
    case Kind::UnknownType: return "UnknownType(" + factor + ": " + type + ")";
  }
  return {};
}

std::vector<Violation> validate_annotation(const WorkAnnotation& a, const FactorTaxonomy& t) {
  std::vector<Violation> out;
  std::map<std::string, int, std::less<>> seen;
  for (const auto& as : a.assignments) {
    const IdeationFactor* f = t.find(as.factor);
    if (!f) {
      out.push_back({Violation::Kind::UnknownFactor, as.factor, as.type});
      continue;
    }
    if (++seen[as.factor] == 2) out.push_back({Violation::Kind::DuplicateFactor, as.factor, {}});
    if (!f->find_type(as.type)) out.push_back({Violation::Kind::UnknownType, as.factor, as.type});
  }
  for (const auto& f : t.factors)
    if (!seen.count(f.name)) out.push_back({Violation::Kind::MissingFactor, f.name, {}});
  return out;
}

void validate_taxonomies(const FactorTaxonomy& factors, const PatternTaxonomy& patterns) {
  const std::string where = "taxonomy";
  if (factors.factors.size() != kFactorNames.size())
    schema_error(where, "expected 4 ideation factors, found " + std::to_string(factors.factors.size()));
  std::set<std::string_view> names(kFactorNames.begin(), kFactorNames.end());
  for (const auto& f : factors.factors) {
    if (!names.erase(f.name)) schema_error(where, "unexpected or repeated factor '" + f.name + "'");
    std::set<std::string> types;
    for (const auto& ty : f.types) {
      if (!types.insert(ty.name).second)
        schema_error(where, "duplicate type '" + ty.name + "' in factor '" + f.name + "'");
      if (std::find(f.subcategories.begin(), f.subcategories.end(), ty.subcategory) == f.subcategories.end())
        schema_error(where, "type '" + ty.name + "' names unknown subcategory '" + ty.subcategory + "'");
      const bool single_level = f.name == "Style" || f.name == "Method of Expression";
      if (single_level && ty.subcategory != kSingleLevel)
        schema_error(where, "factor '" + f.name + "' is single-level; subcategory must be '-'");
    }
  }
  if (factors.type_count() != kFactorTypeCount)
    schema_error(where, "expected 18 factor types, found " + std::to_string(factors.type_count()));

  std::set<std::string> seen;
  for (const auto& e : patterns.lexicon)
    if (!seen.insert(e.name).second) schema_error(where, "duplicate lexicon name '" + e.name + "'");
  for (auto s : kPatternSubcategories) {
    if (patterns.count(s) != expected_lexicon_count(s))
      schema_error(where, "subcategory '" + std::string(subcategory_name(s)) + "' expects " +
                              std::to_string(expected_lexicon_count(s)) + " names, found " +
                              std::to_string(patterns.count(s)));
  }
}

// ---------------------------------------------------------------------------

KnowledgeBase::KnowledgeBase(FactorTaxonomy factors, PatternTaxonomy patterns,
                             std::vector<PatternInterpretation> interpretations,
                             std::vector<WorkAnnotation> works,
                             std::vector<PatternAnnotation> pattern_annotations,
                             std::vector<PromptTemplate> templates)
    : factors_(std::move(factors)),
      patterns_(std::move(patterns)),
      works_(std::move(works)),
      pattern_annotations_(std::move(pattern_annotations)),
      templates_(std::move(templates)) {
  validate_taxonomies(factors_, patterns_);

  for (auto& in : interpretations) {
    if (!patterns_.find(in.pattern_name))
      fail(ErrorCode::UnknownPattern, "interpretation '" + in.id + "' names unknown pattern '" + in.pattern_name + "'");
    for (const auto& c : in.common_combinations)
      if (!patterns_.find(c))
        fail(ErrorCode::UnknownPattern, "interpretation '" + in.id + "' combines unknown pattern '" + c + "'");
    std::string id = in.id;
    if (!interpretations_.emplace(id, std::move(in)).second)
      fail(ErrorCode::DuplicateId, "duplicate interpretation id '" + id + "'");
  }
  for (const auto& e : patterns_.lexicon) {
    auto it = interpretations_.find(e.interpretation_id);
    if (it == interpretations_.end())
      schema_error("taxonomy", "pattern '" + e.name + "' has no interpretation '" + e.interpretation_id + "'");
    if (it->second.pattern_name != e.name)
      schema_error("taxonomy", "interpretation '" + e.interpretation_id + "' belongs to '" +
                                   it->second.pattern_name + "', not '" + e.name + "'");
  }

  for (std::size_t i = 0; i < works_.size(); ++i) {
    const auto& w = works_[i];
    if (!work_index_.emplace(w.work_id, i).second)
      fail(ErrorCode::DuplicateId, "duplicate work id '" + w.work_id + "'");
    for (const auto& v : validate_annotation(w, factors_)) {
      const auto code = (v.kind == Violation::Kind::UnknownType || v.kind == Violation::Kind::UnknownFactor)
                            ? ErrorCode::UnknownType
                            : ErrorCode::SchemaError;
      fail(code, "work '" + w.work_id + "': " + v.describe());
    }
    for (const auto& p : w.composite_patterns) {
      const auto* e = patterns_.find(p);
      if (!e) fail(ErrorCode::UnknownPattern, "work '" + w.work_id + "' names unknown pattern '" + p + "'");
      if (category_of(e->subcategory) != PatternCategory::Composite)
        schema_error("work '" + w.work_id + "'", "'" + p + "' is not a composite pattern");
    }
  }

  std::set<std::string> cutouts;
  for (const auto& pa : pattern_annotations_) {
    if (!cutouts.insert(pa.cutout_id).second)
      fail(ErrorCode::DuplicateId, "duplicate cutout id '" + pa.cutout_id + "'");
    if (!find_work(pa.work_id))
      schema_error("cutout '" + pa.cutout_id + "'", "unknown work '" + pa.work_id + "'");
    const auto* e = patterns_.find(pa.pattern_name);
    if (!e) fail(ErrorCode::UnknownPattern, "cutout '" + pa.cutout_id + "' names unknown pattern '" + pa.pattern_name + "'");
    if (e->subcategory != pa.subcategory)
      schema_error("cutout '" + pa.cutout_id + "'", "subcategory does not match lexicon for '" + pa.pattern_name + "'");
  }

  for (const auto& t : templates_)
    if (!find_work(t.work_id)) schema_error("template", "unknown work '" + t.work_id + "'");
}

const WorkAnnotation* KnowledgeBase::find_work(std::string_view work_id) const {
  auto it = work_index_.find(work_id);
  return it == work_index_.end() ? nullptr : &works_[it->second];
}

const PatternInterpretation& KnowledgeBase::interpretation_of(std::string_view pattern_name) const {
  const auto* e = patterns_.find(pattern_name);
  if (!e) fail(ErrorCode::UnknownPattern, "unknown pattern '" + std::string(pattern_name) + "'");
  return interpretations_.find(e->interpretation_id)->second;
}

std::vector<ScoredSuggestion> KnowledgeBase::suggest(const std::vector<std::string>& intent_keywords,
                                                     const Selections& selections) const {
  if (works_.empty()) fail(ErrorCode::EmptyCorpus, "knowledge base has no annotated works");
  for (const auto& [factor, type] : selections) {
    const auto* f = factors_.find(factor);
    if (!f) fail(ErrorCode::UnknownType, "unknown factor '" + factor + "'");
    if (!f->find_type(type)) fail(ErrorCode::UnknownType, "factor '" + factor + "' has no type '" + type + "'");
  }

  std::set<std::string> keywords;
  for (const auto& k : intent_keywords)
    for (auto& tok : text::tokenize(k)) keywords.insert(std::move(tok));

  // Per-work score, computed once.
  std::vector<int> work_score(works_.size(), 0);
  for (std::size_t i = 0; i < works_.size(); ++i) {
    const auto& w = works_[i];
    int s = 0;
    for (const auto& [factor, type] : selections) {
      const auto* a = w.assignment(factor);
      if (a && a->type == type) ++s;
    }
    std::set<std::string> tokens;
    for (const auto& a : w.assignments)
      for (auto& tok : text::tokenize(a.explanation)) tokens.insert(std::move(tok));
    for (const auto& k : keywords) s += tokens.count(k) ? 1 : 0;
    work_score[i] = s;
  }

  std::map<std::string, int, std::less<>> best;
  auto credit = [&](const std::string& name, std::size_t work) {
    auto [it, inserted] = best.emplace(name, work_score[work]);
    if (!inserted) it->second = std::max(it->second, work_score[work]);
  };
  for (std::size_t i = 0; i < works_.size(); ++i)
    for (const auto& p : works_[i].composite_patterns) credit(p, i);
  for (const auto& pa : pattern_annotations_) credit(pa.pattern_name, work_index_.find(pa.work_id)->second);

  std::vector<ScoredSuggestion> out;
  out.reserve(patterns_.lexicon.size());
  for (const auto& e : patterns_.lexicon) {
    auto it = best.find(e.name);
    out.push_back({e.subcategory == PatternSubcategory::PrimaryComposite ? SuggestionKind::Object
                                                                         : SuggestionKind::Pattern,
                   e.name, interpretations_.find(e.interpretation_id)->second,
                   it == best.end() ? 0 : it->second});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  return out;
}

std::map<Region, std::size_t> region_distribution(const KnowledgeBase& kb) {
  std::map<Region, std::size_t> out;
  for (auto r : kRegions) out[r] = 0;
  for (const auto& w : kb.works()) ++out[w.region];
  return out;
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

namespace {

void parse_taxonomy(const json& j, FactorTaxonomy& factors, PatternTaxonomy& patterns,
                    std::vector<PatternInterpretation>& interpretations) {
  const std::string where = "taxonomy.json";
  if (!j.is_object() || j.value("schema", "") != "cutstudio.taxonomy")
    schema_error(where, "schema must be 'cutstudio.taxonomy'");
  if (j.value("version", 0) != kTaxonomyVersion) schema_error(where, "unsupported version");
  if (!j.contains("factors") || !j["factors"].is_array()) schema_error(where, "missing 'factors'");
  for (const auto& jf : j["factors"]) {
    IdeationFactor f;
    f.name = req_string(jf, "name", where);
    f.subcategories = opt_strings(jf, "subcategories", where);
    if (!jf.contains("types") || !jf["types"].is_array()) schema_error(where, "factor without 'types'");
    for (const auto& jt : jf["types"]) {
      FactorType t;
      t.name = req_string(jt, "name", where);
      t.subcategory = req_string(jt, "subcategory", where);
      t.definition = req_string(jt, "definition", where);
      if (jt.contains("example_work_id") && jt["example_work_id"].is_string())
        t.example_work_id = jt["example_work_id"].get<std::string>();
      f.types.push_back(std::move(t));
    }
    factors.factors.push_back(std::move(f));
  }

  if (!j.contains("pattern_categories") || !j["pattern_categories"].is_object())
    schema_error(where, "missing 'pattern_categories'");
  const auto& cats = j["pattern_categories"];
  if (cats.size() != 2) schema_error(where, "expected 2 pattern categories");
  std::size_t n_sub = 0;
  for (auto c : {PatternCategory::Unit, PatternCategory::Composite}) {
    const std::string cname(category_name(c));
    if (!cats.contains(cname)) schema_error(where, "missing pattern category '" + cname + "'");
    for (const auto& s : opt_strings(cats, cname.c_str(), where)) {
      auto sub = parse_subcategory(s);
      if (!sub || category_of(*sub) != c) schema_error(where, "subcategory '" + s + "' not under '" + cname + "'");
      ++n_sub;
    }
  }
  if (n_sub != kPatternSubcategories.size()) schema_error(where, "expected 5 pattern subcategories");

  if (!j.contains("lexicon") || !j["lexicon"].is_array()) schema_error(where, "missing 'lexicon'");
  for (const auto& je : j["lexicon"]) {
    LexiconEntry e;
    e.name = req_string(je, "name", where);
    auto sub = parse_subcategory(req_string(je, "subcategory", where));
    if (!sub) schema_error(where, "lexicon entry '" + e.name + "' has unknown subcategory");
    e.subcategory = *sub;
    e.interpretation_id = req_string(je, "interpretation_id", where);
    const auto origin = req_string(je, "origin", where);
    if (origin != "attested" && origin != "project")
      schema_error(where, "origin must be 'attested' or 'project'");
    e.project_supplied = origin == "project";
    patterns.lexicon.push_back(std::move(e));
  }

  if (j.contains("interpretations")) {
    for (const auto& ji : j["interpretations"]) {
      PatternInterpretation p;
      p.id = req_string(ji, "id", where);
      p.pattern_name = req_string(ji, "pattern_name", where);
      p.meaning = req_string(ji, "meaning", where);
      p.structure_notes = ji.value("structure_notes", "");
      p.common_combinations = opt_strings(ji, "common_combinations", where);
      interpretations.push_back(std::move(p));
    }
  }
}

WorkAnnotation parse_work(const json& j) {
  const std::string where = j.value("__where", "annotations");
  WorkAnnotation w;
  w.work_id = req_string(j, "work_id", where);
  w.title = req_string(j, "title", where);
  const auto region = req_string(j, "region", where);
  auto r = parse_region(region);
  if (!r) schema_error(where, "unknown region '" + region + "'");
  w.region = *r;
  w.image_ref = req_string(j, "image_ref", where);
  if (!j.contains("assignments") || !j["assignments"].is_array()) schema_error(where, "missing 'assignments'");
  for (const auto& ja : j["assignments"]) {
    w.assignments.push_back({req_string(ja, "factor", where), req_string(ja, "type", where),
                             ja.value("explanation", "")});
  }
  w.composite_patterns = opt_strings(j, "composite_patterns", where);
  return w;
}

}  // namespace

KnowledgeBase load_corpus(const std::filesystem::path& data_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(data_dir)) fail(ErrorCode::IoError, "not a directory: " + data_dir.string());

  FactorTaxonomy factors;
  PatternTaxonomy patterns;
  std::vector<PatternInterpretation> interpretations;
  parse_taxonomy(read_json_file(data_dir / "taxonomy.json"), factors, patterns, interpretations);

  std::vector<fs::path> annotation_files;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("annotations", 0) == 0 && entry.path().extension() == ".jsonl")
      annotation_files.push_back(entry.path());
  }
  if (annotation_files.empty()) schema_error(data_dir.string(), "no annotations*.jsonl file");
  std::sort(annotation_files.begin(), annotation_files.end());

  std::vector<WorkAnnotation> works;
  for (const auto& f : annotation_files)
    for (const auto& rec : read_records(f, "cutstudio.annotations")) works.push_back(parse_work(rec));

  std::vector<PatternAnnotation> pattern_annotations;
  if (fs::exists(data_dir / "pattern_annotations.jsonl")) {
    for (const auto& rec : read_records(data_dir / "pattern_annotations.jsonl", "cutstudio.pattern_annotations")) {
      const std::string where = rec.value("__where", "pattern_annotations");
      PatternAnnotation pa;
      pa.cutout_id = req_string(rec, "cutout_id", where);
      pa.work_id = req_string(rec, "work_id", where);
      auto sub = parse_subcategory(req_string(rec, "subcategory", where));
      if (!sub) schema_error(where, "unknown subcategory");
      pa.subcategory = *sub;
      pa.pattern_name = req_string(rec, "pattern_name", where);
      pa.geometry_ref = rec.value("geometry_ref", "");
      pattern_annotations.push_back(std::move(pa));
    }
  }

  std::vector<PromptTemplate> templates;
  if (fs::exists(data_dir / "templates.jsonl")) {
    for (const auto& rec : read_records(data_dir / "templates.jsonl", "cutstudio.templates")) {
      const std::string where = rec.value("__where", "templates");
      templates.push_back({req_string(rec, "work_id", where), req_string(rec, "question", where),
                           req_string(rec, "answer", where)});
    }
  }

  return KnowledgeBase(std::move(factors), std::move(patterns), std::move(interpretations), std::move(works),
                       std::move(pattern_annotations), std::move(templates));
}

}  // namespace cutstudio::kb
