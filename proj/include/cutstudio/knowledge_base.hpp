#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cutstudio::kb {

// ---------------------------------------------------------------------------
// Design-space taxonomies
// ---------------------------------------------------------------------------

enum class Region {
  CentralChina,
  EastChina,
  NorthChina,
  Northeast,
  Northwest,
  SouthChina,
  Southwest,
};

inline constexpr std::array<Region, 7> kRegions = {
    Region::CentralChina, Region::EastChina,  Region::NorthChina, Region::Northeast,
    Region::Northwest,    Region::SouthChina, Region::Southwest,
};

std::string_view region_name(Region r);
std::optional<Region> parse_region(std::string_view name);

inline constexpr std::array<std::string_view, 4> kFactorNames = {
    "Function", "Subject Matter", "Style", "Method of Expression"};
inline constexpr std::size_t kFactorTypeCount = 18;
/// Subcategory marker for factors that have a single level of types.
inline constexpr std::string_view kSingleLevel = "-";

struct FactorType {
  std::string name;
  std::string subcategory;
  std::string definition;
  std::optional<std::string> example_work_id;
};

struct IdeationFactor {
  std::string name;
  std::vector<std::string> subcategories;
  std::vector<FactorType> types;

  const FactorType* find_type(std::string_view type_name) const;
};

struct FactorTaxonomy {
  std::vector<IdeationFactor> factors;

  const IdeationFactor* find(std::string_view factor_name) const;
  std::size_t type_count() const;
};

enum class PatternCategory { Unit, Composite };

enum class PatternSubcategory {
  GeometricUnit,
  SemanticUnit,
  Sawtooth,
  PrimaryComposite,
  DecorativeComposite,
};

inline constexpr std::array<PatternSubcategory, 5> kPatternSubcategories = {
    PatternSubcategory::GeometricUnit, PatternSubcategory::SemanticUnit,
    PatternSubcategory::Sawtooth, PatternSubcategory::PrimaryComposite,
    PatternSubcategory::DecorativeComposite};

std::string_view category_name(PatternCategory c);
std::string_view subcategory_name(PatternSubcategory s);
std::optional<PatternSubcategory> parse_subcategory(std::string_view name);
PatternCategory category_of(PatternSubcategory s);
/// Number of lexicon names each subcategory must carry (8/12/5 unit, 34/8 composite).
std::size_t expected_lexicon_count(PatternSubcategory s);

struct LexiconEntry {
  std::string name;
  PatternSubcategory subcategory;
  std::string interpretation_id;
  /// True when the name is a placeholder supplied by this project rather than
  /// one attested in the source taxonomy.
  bool project_supplied = true;
};

struct PatternInterpretation {
  std::string id;
  std::string pattern_name;
  std::string meaning;
  std::string structure_notes;
  std::vector<std::string> common_combinations;

  bool operator==(const PatternInterpretation&) const = default;
};

struct PatternTaxonomy {
  std::vector<LexiconEntry> lexicon;

  const LexiconEntry* find(std::string_view name) const;
  std::size_t count(PatternSubcategory s) const;
  std::size_t count(PatternCategory c) const;
};

// ---------------------------------------------------------------------------
// Corpus records
// ---------------------------------------------------------------------------

struct FactorAssignment {
  std::string factor;
  std::string type;
  std::string explanation;
};

struct WorkAnnotation {
  std::string work_id;
  std::string title;
  Region region = Region::CentralChina;
  std::string image_ref;
  std::vector<FactorAssignment> assignments;
  std::vector<std::string> composite_patterns;

  const FactorAssignment* assignment(std::string_view factor) const;
};

struct PatternAnnotation {
  std::string cutout_id;
  std::string work_id;
  PatternSubcategory subcategory;
  std::string pattern_name;
  std::string geometry_ref;
};

/// One paired question/answer few-shot record derived from an annotated work.
struct PromptTemplate {
  std::string work_id;
  std::string question;
  std::string answer;
};

struct Violation {
  enum class Kind { MissingFactor, DuplicateFactor, UnknownFactor, UnknownType };
  Kind kind;
  std::string factor;
  std::string type;

  std::string describe() const;
  bool operator==(const Violation&) const = default;
};

/// Empty iff the annotation assigns exactly one known type to each factor.
std::vector<Violation> validate_annotation(const WorkAnnotation& a, const FactorTaxonomy& t);

enum class SuggestionKind { Object, Pattern };
std::string_view to_string(SuggestionKind k);

struct ScoredSuggestion {
  SuggestionKind kind;
  std::string name;
  PatternInterpretation interpretation;
  int score = 0;

  bool operator==(const ScoredSuggestion&) const = default;
};

using Selections = std::map<std::string, std::string>;

// ---------------------------------------------------------------------------
// KnowledgeBase
// ---------------------------------------------------------------------------

/// Validated, immutable snapshot of taxonomies and corpus. Construction either
/// yields a fully cross-referenced knowledge base or throws.
class KnowledgeBase {
 public:
  KnowledgeBase(FactorTaxonomy factors, PatternTaxonomy patterns,
                std::vector<PatternInterpretation> interpretations,
                std::vector<WorkAnnotation> works,
                std::vector<PatternAnnotation> pattern_annotations = {},
                std::vector<PromptTemplate> templates = {});

  const FactorTaxonomy& factors() const { return factors_; }
  const PatternTaxonomy& patterns() const { return patterns_; }
  const std::vector<WorkAnnotation>& works() const { return works_; }
  const std::vector<PatternAnnotation>& pattern_annotations() const { return pattern_annotations_; }
  const std::vector<PromptTemplate>& templates() const { return templates_; }

  const WorkAnnotation* find_work(std::string_view work_id) const;

  /// Ranked content recommendations over the whole lexicon. Score of an item
  /// is the best, over the works it appears in, of (factor types matching
  /// `selections`) + (distinct keyword tokens found in that work's
  /// explanations). Descending score, then ascending name.
  std::vector<ScoredSuggestion> suggest(const std::vector<std::string>& intent_keywords,
                                        const Selections& selections) const;

  const PatternInterpretation& interpretation_of(std::string_view pattern_name) const;

 private:
  FactorTaxonomy factors_;
  PatternTaxonomy patterns_;
  std::map<std::string, PatternInterpretation, std::less<>> interpretations_;
  std::vector<WorkAnnotation> works_;
  std::vector<PatternAnnotation> pattern_annotations_;
  std::vector<PromptTemplate> templates_;
  std::map<std::string, std::size_t, std::less<>> work_index_;
};

/// Reads taxonomy.json, every annotations*.jsonl, and the optional
/// templates.jsonl / pattern_annotations.jsonl from `data_dir`.
KnowledgeBase load_corpus(const std::filesystem::path& data_dir);

std::map<Region, std::size_t> region_distribution(const KnowledgeBase& kb);

/// Checks a taxonomy against the fixed factor and pattern counts; throws
/// SchemaError on any deviation.
void validate_taxonomies(const FactorTaxonomy& factors, const PatternTaxonomy& patterns);

}  // namespace cutstudio::kb
