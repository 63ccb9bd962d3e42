#include "cutstudio/ideation.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "cutstudio/error.hpp"
#include "cutstudio/text.hpp"

namespace cutstudio::ideation {

namespace {

constexpr std::string_view kEmDash = "\xE2\x80\x94";

std::string upper_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

/// Returns the block a label line opens, if it is one.
std::optional<SuggestionList> block_label(std::string_view line) {
  std::string s = text::trim(line);
  while (!s.empty() && (s.front() == '#' || s.front() == '*')) s.erase(s.begin());
  while (!s.empty() && s.back() == '*') s.pop_back();
  s = text::trim(s);
  if (!s.empty() && s.back() == ':') s.pop_back();
  s = upper_ascii(text::trim(s));
  if (s == "OBJECTS") return SuggestionList::Objects;
  if (s == "PATTERNS") return SuggestionList::Patterns;
  return std::nullopt;
}

std::string strip_bullet(std::string s) {
  if (s.rfind("- ", 0) == 0 || s.rfind("* ", 0) == 0) return text::trim(s.substr(2));
  if (s.rfind("\xE2\x80\xA2", 0) == 0) return text::trim(s.substr(3));  // bullet
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i > 0 && i + 1 < s.size() && (s[i] == '.' || s[i] == ')') && s[i + 1] == ' ')
    return text::trim(s.substr(i + 2));
  return s;
}

std::optional<Suggestion> parse_item(const std::string& line) {
  const std::string body = strip_bullet(text::trim(line));
  for (std::string_view sep : {std::string_view(" \xE2\x80\x94 "), kEmDash, std::string_view(" -- "),
                               std::string_view(" - ")}) {
    auto pos = body.find(sep);
    if (pos == std::string::npos) continue;
    Suggestion s{text::trim(body.substr(0, pos)), text::trim(body.substr(pos + sep.size()))};
    if (s.name.empty()) return std::nullopt;
    return s;
  }
  return std::nullopt;
}

std::string selection_lines(const kb::Selections& selections) {
  std::ostringstream os;
  for (auto f : kb::kFactorNames) {
    auto it = selections.find(std::string(f));
    if (it != selections.end()) os << "- " << it->first << ": " << it->second << "\n";
  }
  return os.str();
}

}  // namespace

std::vector<std::string> validate_intent(const DesignIntent& intent, const kb::FactorTaxonomy& t) {
  std::vector<std::string> out;
  for (const auto& [factor, type] : intent.selections) {
    const auto* f = t.find(factor);
    if (!f)
      out.push_back("UnknownFactor(" + factor + ")");
    else if (!f->find_type(type))
      out.push_back("UnknownType(" + factor + ": " + type + ")");
  }
  return out;
}

std::string_view to_string(SuggestionSource s) { return s == SuggestionSource::Provider ? "provider" : "fallback"; }

PromptBundle build_ideation_prompt(const DesignIntent& intent, const kb::KnowledgeBase& kb,
                                   std::size_t exemplar_count) {
  const auto& templates = kb.templates();
  if (templates.empty()) fail(ErrorCode::EmptyTemplateCorpus, "no prompt templates loaded");
  if (auto v = validate_intent(intent, kb.factors()); !v.empty())
    fail(ErrorCode::UnknownType, "invalid intent: " + text::join(v, ", "));

  struct Ranked {
    std::size_t overlap;
    const kb::PromptTemplate* t;
    std::size_t order;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(templates.size());
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto* w = kb.find_work(templates[i].work_id);
    std::size_t overlap = 0;
    for (const auto& [factor, type] : intent.selections) {
      const auto* a = w->assignment(factor);
      if (a && a->type == type) ++overlap;
    }
    ranked.push_back({overlap, &templates[i], i});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.t->work_id != b.t->work_id) return a.t->work_id < b.t->work_id;
    return a.order < b.order;
  });

  PromptBundle bundle;
  std::ostringstream pre;
  pre << "You are a paper-cutting design assistant. Work within this design space.\n"
      << "Ideation factors and their types:\n";
  for (const auto& f : kb.factors().factors) {
    pre << f.name << ":\n";
    for (const auto& t : f.types) pre << "  - " << t.name << ": " << t.definition << "\n";
  }
  pre << "Recommend objects and patterns that fit the user's intent and explain their meaning.\n"
      << "Reply with two list blocks labeled OBJECTS: and PATTERNS:, one item per line "
         "formatted as \"- name \xE2\x80\x94 meaning\".\n";
  bundle.system_preamble = pre.str();

  const std::size_t n = std::min(exemplar_count, ranked.size());
  for (std::size_t i = 0; i < n; ++i) bundle.exemplars.emplace_back(ranked[i].t->question, ranked[i].t->answer);

  bundle.user_block = "Design intent: " + intent.intent_text + "\nSelected factor types:\n" +
                      selection_lines(intent.selections);
  bundle.provider_hints = {{"reply_format", "objects-patterns-v1"},
                           {"exemplars", std::to_string(bundle.exemplars.size())}};
  return bundle;
}

SuggestionSet parse_suggestions(std::string_view reply) {
  SuggestionSet set;
  set.source = SuggestionSource::Provider;
  std::optional<SuggestionList> current;
  bool any_label = false;
  std::istringstream in{std::string(reply)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (auto label = block_label(line)) {
      current = label;
      any_label = true;
      continue;
    }
    if (!current || text::trim(line).empty()) continue;
    auto item = parse_item(line);
    if (!item) fail(ErrorCode::ParseError, "not a 'name \xE2\x80\x94 meaning' item: " + line);
    (*current == SuggestionList::Objects ? set.objects : set.patterns).push_back(std::move(*item));
  }
  if (!any_label) fail(ErrorCode::ParseError, "reply has no OBJECTS/PATTERNS block");
  if (set.objects.empty() && set.patterns.empty()) fail(ErrorCode::ParseError, "reply blocks are empty");
  return set;
}

void SessionLog::record(std::string entry) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(entry));
}

std::vector<std::string> SessionLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

SuggestionSet fallback_suggestions(const DesignIntent& intent, const kb::KnowledgeBase& kb) {
  SuggestionSet set;
  set.source = SuggestionSource::Fallback;
  for (const auto& s : kb.suggest({intent.intent_text}, intent.selections)) {
    auto& list = s.kind == kb::SuggestionKind::Object ? set.objects : set.patterns;
    list.push_back({s.name, s.interpretation.meaning});
  }
  return set;
}

SuggestionSet request_suggestions(const PromptBundle& bundle, const DesignIntent& intent,
                                  const kb::KnowledgeBase& kb, const TextProvider& provider,
                                  SessionLog* log) {
  if (provider) {
    try {
      return parse_suggestions(provider(bundle));
    } catch (const Error& e) {
      if (log) log->record(std::string("suggestions: ") + std::string(to_string(e.code())) + ": " + e.what());
    } catch (const std::exception& e) {
      if (log) log->record(std::string("suggestions: provider fault: ") + e.what());
    }
  }
  return fallback_suggestions(intent, kb);
}

std::vector<SuggestionRef> resolve_refs(const SuggestionSet& set,
                                        const std::vector<std::pair<SuggestionList, std::size_t>>& picks) {
  std::vector<SuggestionRef> out;
  for (const auto& [list, index] : picks) {
    const auto& items = list == SuggestionList::Objects ? set.objects : set.patterns;
    if (index >= items.size())
      fail(ErrorCode::InvalidArgument, "suggestion index " + std::to_string(index) + " out of range");
    out.push_back({list, index, items[index].name});
  }
  return out;
}

IdeaDescription compose_idea(const DesignIntent& intent, std::vector<SuggestionRef> accepted) {
  const std::string intent_text = text::trim(intent.intent_text);
  if (accepted.empty() && intent_text.empty()) fail(ErrorCode::EmptyIdea, "nothing accepted and no intent text");

  std::vector<std::string> names;
  for (const auto& r : accepted)
    if (std::find(names.begin(), names.end(), r.name) == names.end()) names.push_back(r.name);

  auto selected = [&](std::string_view factor) -> const std::string* {
    auto it = intent.selections.find(std::string(factor));
    return it == intent.selections.end() ? nullptr : &it->second;
  };

  std::string out;
  if (const auto* style = selected("Style")) out = *style + " ";
  out += "paper-cutting image";

  if (!names.empty()) {
    out += ", featuring ";
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i) out += (i + 1 == names.size()) ? " and " : ", ";
      out += names[i];
    }
  } else {
    out += ", " + intent_text;
  }

  std::vector<std::string> expressing;
  if (const auto* s = selected("Subject Matter")) expressing.push_back(*s);
  if (const auto* m = selected("Method of Expression")) expressing.push_back(*m);
  if (!expressing.empty()) out += ", expressing " + text::join(expressing, " through ");
  if (const auto* f = selected("Function")) out += ", for " + *f;

  return IdeaDescription{std::move(out), std::move(accepted), intent};
}

}  // namespace cutstudio::ideation
