#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cutstudio/knowledge_base.hpp"

namespace cutstudio::ideation {

struct DesignIntent {
  std::string intent_text;
  kb::Selections selections;  ///< factor name -> type name, at most one per factor

  bool operator==(const DesignIntent&) const = default;
};

/// Violations of the intent against the taxonomy, rendered as readable strings.
std::vector<std::string> validate_intent(const DesignIntent& intent, const kb::FactorTaxonomy& t);

inline constexpr std::size_t kDefaultExemplars = 4;

struct PromptBundle {
  std::string system_preamble;
  std::vector<std::pair<std::string, std::string>> exemplars;  ///< (question, answer)
  std::string user_block;
  std::map<std::string, std::string> provider_hints;

  bool operator==(const PromptBundle&) const = default;
};

/// Few-shot prompt: the `exemplar_count` templates whose source works share the
/// most selected factor types with the intent (ties by ascending work id, then
/// file order).
PromptBundle build_ideation_prompt(const DesignIntent& intent, const kb::KnowledgeBase& kb,
                                   std::size_t exemplar_count = kDefaultExemplars);

enum class SuggestionSource { Provider, Fallback };
std::string_view to_string(SuggestionSource s);

struct Suggestion {
  std::string name;
  std::string meaning;

  bool operator==(const Suggestion&) const = default;
};

struct SuggestionSet {
  std::vector<Suggestion> objects;
  std::vector<Suggestion> patterns;
  SuggestionSource source = SuggestionSource::Fallback;

  bool operator==(const SuggestionSet&) const = default;
};

/// Parses a provider reply under the OBJECTS/PATTERNS list-block contract:
///
///   OBJECTS:
///   - magpie <sep> bird of joy
///   PATTERNS:
///   - crescent <sep> moon-tooth curve
///
/// where <sep> is U+2014 (" -- " and " - " are tolerated). Lines before the first
/// block label are ignored. Throws ParseError if no label is present, if both
/// blocks are empty, or if a block line is not a name/meaning item.
SuggestionSet parse_suggestions(std::string_view reply);

/// Thread-safe append-only fault log kept per session.
class SessionLog {
 public:
  void record(std::string entry);
  std::vector<std::string> entries() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> entries_;
};

/// Anything that can turn a prompt bundle into raw reply text. The gateway's
/// text client satisfies this; tests supply canned callables.
using TextProvider = std::function<std::string(const PromptBundle&)>;

/// Deterministic suggestions straight from the knowledge base.
SuggestionSet fallback_suggestions(const DesignIntent& intent, const kb::KnowledgeBase& kb);

/// Asks the provider; any provider fault or unparsable reply is recorded in
/// `log` and answered with the knowledge-base fallback instead.
SuggestionSet request_suggestions(const PromptBundle& bundle, const DesignIntent& intent,
                                  const kb::KnowledgeBase& kb, const TextProvider& provider,
                                  SessionLog* log = nullptr);

enum class SuggestionList { Objects, Patterns };

struct SuggestionRef {
  SuggestionList list = SuggestionList::Objects;
  std::size_t index = 0;
  std::string name;

  bool operator==(const SuggestionRef&) const = default;
};

struct IdeaDescription {
  std::string text;
  std::vector<SuggestionRef> accepted;
  DesignIntent intent;

  bool operator==(const IdeaDescription&) const = default;
};

/// Resolves (list, index) pairs against `set`, filling in names. Throws
/// InvalidArgument for out-of-range indices.
std::vector<SuggestionRef> resolve_refs(const SuggestionSet& set,
                                        const std::vector<std::pair<SuggestionList, std::size_t>>& picks);

/// "<Style> paper-cutting image, featuring <accepted>, expressing <subject
/// and expression types>, for <function>". Selections absent from the intent
/// drop their clause. With nothing accepted the intent text fills the content
/// slot. Throws EmptyIdea when both accepted and intent text are empty.
IdeaDescription compose_idea(const DesignIntent& intent, std::vector<SuggestionRef> accepted);

inline IdeaDescription edit_idea(IdeaDescription idea, std::string new_text) {
  idea.text = std::move(new_text);
  return idea;
}

}  // namespace cutstudio::ideation
