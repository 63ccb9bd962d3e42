#include <algorithm>
#include <cctype>
#include <cstdio>
#include <random>

#include "cutstudio/studio.hpp"
#include "cutstudio/text.hpp"

namespace cutstudio::studio {

using nlohmann::json;

// --- configuration ----------------------------------------------------------------

Listen parse_listen(const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::InvalidArgument, "listen address needs host:port: " + spec);
  Listen l;
  if (colon > 0) l.host = spec.substr(0, colon);
  try {
    std::size_t used = 0;
    l.port = std::stoi(spec.substr(colon + 1), &used);
    if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidArgument, "bad port in listen address: " + spec);
  }
  if (l.port < 0 || l.port > 65535) fail(ErrorCode::InvalidArgument, "port out of range: " + spec);
  return l;
}

void ServiceConfig::validate() const {
  if (k_retrieve < 1) fail(ErrorCode::InvalidArgument, "k_retrieve must be at least 1");
  for (const auto* p : {&text, &embed, &generate, &segment}) p->validate();
}

ServiceConfig ServiceConfig::from_env(const gateway::EnvLookup& env) {
  ServiceConfig cfg;
  if (auto v = env("HC_DATA_DIR"); v && !v->empty()) cfg.data_dir = *v;
  if (auto v = env("HC_CACHE_DIR"); v && !v->empty()) cfg.cache_dir = *v;
  if (auto v = env("HC_LISTEN"); v && !v->empty()) cfg.listen = parse_listen(*v);
  cfg.text = gateway::ProviderConfig::from_env(gateway::ProviderKind::Text, env);
  cfg.embed = gateway::ProviderConfig::from_env(gateway::ProviderKind::Embed, env);
  cfg.generate = gateway::ProviderConfig::from_env(gateway::ProviderKind::Generate, env);
  cfg.segment = gateway::ProviderConfig::from_env(gateway::ProviderKind::Segment, env);
  cfg.offline = cfg.text.offline;
  return cfg;
}

// --- errors -------------------------------------------------------------------------

int http_status(const Error& e) {
  if (const auto* se = dynamic_cast<const ServiceError*>(&e)) return se->status();
  switch (e.code()) {
    case ErrorCode::SchemaError:
    case ErrorCode::UnknownType:
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptyIdea:
    case ErrorCode::UnsupportedFeature: return 400;
    case ErrorCode::UnknownId: return 404;
    case ErrorCode::StaleState:
    case ErrorCode::Conflict: return 409;
    case ErrorCode::PointOnOppositeClass:
    case ErrorCode::EmptyResult:
    case ErrorCode::DuplicateId:
    case ErrorCode::SingularTransform:
    case ErrorCode::CrossParentGroup:
    case ErrorCode::NotAGroup:
    case ErrorCode::NoOverlap:
    case ErrorCode::NotACutout: return 422;
    case ErrorCode::SegmentationFailed: return e.cause() == ErrorCode::PointOnOppositeClass ? 422 : 502;
    case ErrorCode::Timeout:
    case ErrorCode::ProviderError:
    case ErrorCode::OfflineMiss: return 502;
    default: return 500;
  }
}

json error_body(const Error& e) {
  json err = {{"code", to_string(e.code())}, {"message", e.what()}};
  if (e.cause()) err["cause"] = to_string(*e.cause());
  if (const auto* se = dynamic_cast<const ServiceError*>(&e); se && se->details().is_object())
    for (const auto& [k, v] : se->details().items()) err[k] = v;
  return {{"error", std::move(err)}};
}

[[noreturn]] static void reject(int status, ErrorCode code, const std::string& msg, json details = nullptr) {
  throw ServiceError(status, code, msg, std::move(details));
}

[[noreturn]] static void rethrow_with(int status, const Error& e) {
  throw ServiceError(status, e.code(), e.what(), nullptr, e.cause());
}

std::string_view to_string(RefOrigin o) { return o == RefOrigin::Retrieved ? "retrieved" : "generated"; }

// --- JSON forms of session state --------------------------------------------------

namespace {

json intent_json(const ideation::DesignIntent& i) {
  return {{"intent_text", i.intent_text}, {"selections", i.selections}};
}

ideation::DesignIntent intent_from(const json& j) {
  ideation::DesignIntent i;
  i.intent_text = j.value("intent_text", "");
  if (j.contains("selections")) i.selections = j.at("selections").get<kb::Selections>();
  return i;
}

json suggestions_json(const ideation::SuggestionSet& s) {
  auto list = [](const std::vector<ideation::Suggestion>& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back({{"name", x.name}, {"meaning", x.meaning}});
    return a;
  };
  return {{"objects", list(s.objects)}, {"patterns", list(s.patterns)}, {"source", ideation::to_string(s.source)}};
}

ideation::SuggestionSet suggestions_from(const json& j) {
  ideation::SuggestionSet s;
  for (const auto& x : j.at("objects")) s.objects.push_back({x.at("name"), x.at("meaning")});
  for (const auto& x : j.at("patterns")) s.patterns.push_back({x.at("name"), x.at("meaning")});
  s.source = j.at("source") == "provider" ? ideation::SuggestionSource::Provider : ideation::SuggestionSource::Fallback;
  return s;
}

std::string_view list_name(ideation::SuggestionList l) {
  return l == ideation::SuggestionList::Objects ? "objects" : "patterns";
}

ideation::SuggestionList parse_list(const std::string& s) {
  if (s == "objects") return ideation::SuggestionList::Objects;
  if (s == "patterns") return ideation::SuggestionList::Patterns;
  fail(ErrorCode::SchemaError, "list must be objects or patterns, got '" + s + "'");
}

json idea_json(const ideation::IdeaDescription& idea) {
  json acc = json::array();
  for (const auto& r : idea.accepted) acc.push_back({{"list", list_name(r.list)}, {"index", r.index}, {"name", r.name}});
  return {{"text", idea.text}, {"accepted", std::move(acc)}, {"intent", intent_json(idea.intent)}};
}

ideation::IdeaDescription idea_from(const json& j) {
  ideation::IdeaDescription idea;
  idea.text = j.at("text");
  for (const auto& r : j.at("accepted"))
    idea.accepted.push_back({parse_list(r.at("list")), r.at("index").get<std::size_t>(), r.at("name")});
  idea.intent = intent_from(j.at("intent"));
  return idea;
}

json reference_json(const Reference& r) {
  json j = {{"ref", r.ref}, {"origin", to_string(r.origin)}, {"image_ref", r.image.string()}};
  if (r.origin == RefOrigin::Retrieved) {
    j["work_id"] = r.work_id;
    j["score"] = r.score;
    j["rank"] = r.rank;
  }
  return j;
}

Reference reference_from(const json& j) {
  Reference r;
  r.ref = j.at("ref");
  r.origin = j.at("origin") == "generated" ? RefOrigin::Generated : RefOrigin::Retrieved;
  r.image = j.at("image_ref").get<std::string>();
  r.work_id = j.value("work_id", "");
  r.score = j.value("score", 0.0);
  r.rank = j.value("rank", std::size_t{0});
  return r;
}

bool non_negative(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

bool valid_session_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

std::string new_session_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

std::vector<Pixel> parse_points(const json& body, const char* key) {
  std::vector<Pixel> out;
  if (!body.contains(key)) return out;
  const json& pts = body.at(key);
  if (!pts.is_array()) fail(ErrorCode::SchemaError, std::string(key) + " must be a list of points");
  for (const auto& p : pts) {
    if (p.is_array() && p.size() == 2 && p[0].is_number_integer() && p[1].is_number_integer())
      out.push_back({p[0].get<int>(), p[1].get<int>()});
    else if (p.is_object() && p.contains("x") && p.contains("y") && p["x"].is_number_integer() &&
             p["y"].is_number_integer())
      out.push_back({p["x"].get<int>(), p["y"].get<int>()});
    else
      fail(ErrorCode::SchemaError, std::string(key) + " points are [x, y] or {\"x\", \"y\"} integers");
  }
  return out;
}

}  // namespace

json session_state_json(const Session& s) {
  json j = {{"intent", intent_json(s.intent)}, {"version", s.version}};
  j["suggestions"] = s.suggestions ? suggestions_json(*s.suggestions) : json(nullptr);
  j["idea"] = s.idea ? idea_json(*s.idea) : json(nullptr);
  j["retrieved"] = json::array();
  for (const auto& r : s.retrieved) j["retrieved"].push_back(reference_json(r));
  j["generated"] = json::array();
  for (const auto& r : s.generated) j["generated"].push_back(reference_json(r));
  return j;
}

// --- Studio -------------------------------------------------------------------------

Studio::Studio(ServiceConfig cfg, std::shared_ptr<const kb::KnowledgeBase> kb,
               std::shared_ptr<const retrieval::RetrievalIndex> index, std::shared_ptr<gateway::Gateway> gateway)
    : cfg_(std::move(cfg)), kb_(std::move(kb)), index_(std::move(index)), gateway_(std::move(gateway)) {
  cfg_.validate();
  exemplars_ = pattern_exemplars(*kb_, cfg_.data_dir);
}

std::unique_ptr<Studio> Studio::open(ServiceConfig cfg, std::shared_ptr<gateway::Transport> transport,
                                     gateway::Sleeper sleeper) {
  for (auto* p : {&cfg.text, &cfg.embed, &cfg.generate, &cfg.segment}) {
    p->cache_dir = cfg.cache_dir;
    p->offline = p->offline || cfg.offline;
  }
  cfg.validate();
  auto kb = std::make_shared<const kb::KnowledgeBase>(kb::load_corpus(cfg.data_dir));
  auto gw = std::make_shared<gateway::Gateway>(cfg.text, cfg.embed, cfg.generate, cfg.segment, std::move(transport),
                                               std::move(sleeper));
  std::shared_ptr<const retrieval::RetrievalIndex> index;
  if (!cfg.index_path.empty() && std::filesystem::exists(cfg.index_path)) {
    index = std::make_shared<const retrieval::RetrievalIndex>(retrieval::load_index(cfg.index_path));
  } else {
    gateway::GatewayEmbedder embedder(gw->embed);
    index = std::make_shared<const retrieval::RetrievalIndex>(
        retrieval::build_index(index_items(*kb, cfg.data_dir), embedder));
  }
  return std::make_unique<Studio>(std::move(cfg), std::move(kb), std::move(index), std::move(gw));
}

json Studio::health() const {
  return {{"status", "ok"},
          {"works", kb_->works().size()},
          {"index_size", index_->size()},
          {"index_stamp", index_->build_stamp()},
          {"pattern_exemplars", exemplars_.size()},
          {"offline", cfg_.offline},
          {"k_retrieve", cfg_.k_retrieve}};
}

std::shared_ptr<Session> Studio::session(const std::string& id) {
  if (!valid_session_id(id)) reject(404, ErrorCode::UnknownId, "no session '" + id + "'");
  std::lock_guard lock(sessions_mu_);
  if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  const auto path = cfg_.session_dir / (id + ".json");
  if (cfg_.session_dir.empty() || !std::filesystem::exists(path))
    reject(404, ErrorCode::UnknownId, "no session '" + id + "'");
  json state;
  auto s = std::make_shared<Session>();
  s->id = id;
  s->board = moodboard::load_session(path, &state);
  try {
    s->intent = intent_from(state.at("intent"));
    if (!state.at("suggestions").is_null()) s->suggestions = suggestions_from(state.at("suggestions"));
    if (!state.at("idea").is_null()) s->idea = idea_from(state.at("idea"));
    for (const auto& r : state.at("retrieved")) s->retrieved.push_back(reference_from(r));
    for (const auto& r : state.at("generated")) s->generated.push_back(reference_from(r));
    s->version = state.at("version").get<std::size_t>();
  } catch (const std::exception& e) {
    fail(ErrorCode::CorruptSession, "session " + id + ": " + e.what());
  }
  sessions_.emplace(id, s);
  return s;
}

void Studio::persist(const Session& s) const {
  if (cfg_.session_dir.empty()) return;
  moodboard::save_session(s.board, cfg_.session_dir / (s.id + ".json"), session_state_json(s));
}

json Studio::create_session(const json& body) {
  moodboard::SceneGraph initial;
  if (!body.is_object()) reject(400, ErrorCode::SchemaError, "body must be a JSON object");
  if (body.contains("canvas")) {
    const json& c = body["canvas"];
    if (!c.is_object() || !c.value("width", json()).is_number() || !c.value("height", json()).is_number())
      reject(400, ErrorCode::SchemaError, "canvas needs numeric width and height");
    initial.canvas_width = c["width"].get<double>();
    initial.canvas_height = c["height"].get<double>();
    if (!(initial.canvas_width > 0) || !(initial.canvas_height > 0))
      reject(400, ErrorCode::SchemaError, "canvas must be positive");
  }
  auto s = std::make_shared<Session>();
  s->id = new_session_id();
  s->board = moodboard::BoardHistory(initial);
  {
    std::lock_guard lock(sessions_mu_);
    sessions_.emplace(s->id, s);
  }
  std::lock_guard lock(s->mu);
  persist(*s);
  return {{"session_id", s->id}, {"version", s->version}, {"board", moodboard::to_json(s->board.current())}};
}

json Studio::get_session(const std::string& id) {
  auto s = session(id);
  std::lock_guard lock(s->mu);
  json j = session_state_json(*s);
  j["session_id"] = s->id;
  j["board"] = moodboard::to_json(s->board.current());
  j["op_count"] = s->board.log().size();
  j["faults"] = s->log.entries();
  return j;
}

json Studio::set_intent(const std::string& id, const json& body) {
  auto s = session(id);
  ideation::DesignIntent intent;
  try {
    if (!body.is_object()) fail(ErrorCode::SchemaError, "body must be a JSON object");
    if (body.contains("intent_text") && !body["intent_text"].is_string())
      fail(ErrorCode::SchemaError, "intent_text must be a string");
    if (body.contains("selections")) {
      if (!body["selections"].is_object()) fail(ErrorCode::SchemaError, "selections must be an object");
      for (const auto& [k, v] : body["selections"].items())
        if (!v.is_string()) fail(ErrorCode::SchemaError, "selection for " + k + " must be a string");
    }
    intent = intent_from(body);
  } catch (const Error& e) {
    reject(400, ErrorCode::SchemaError, e.what(), {{"violations", {e.what()}}});
  }
  const auto violations = ideation::validate_intent(intent, kb_->factors());
  if (!violations.empty())
    reject(400, ErrorCode::SchemaError, "intent violates the taxonomy", {{"violations", violations}});

  std::lock_guard lock(s->mu);
  const auto bundle = ideation::build_ideation_prompt(intent, *kb_);
  const auto set =
      ideation::request_suggestions(bundle, intent, *kb_, gateway::text_provider(gateway_->text), &s->log);
  s->intent = intent;
  s->suggestions = set;
  s->idea.reset();
  persist(*s);
  return suggestions_json(set);
}

json Studio::set_idea(const std::string& id, const json& body) {
  auto s = session(id);
  std::lock_guard lock(s->mu);
  std::vector<std::pair<ideation::SuggestionList, std::size_t>> picks;
  std::optional<std::string> text;
  try {
    if (!body.is_object()) fail(ErrorCode::SchemaError, "body must be a JSON object");
    if (body.contains("accept")) {
      if (!body["accept"].is_array()) fail(ErrorCode::SchemaError, "accept must be a list");
      for (const auto& a : body["accept"]) {
        if (!a.is_object() || !a.contains("list") || !a["list"].is_string() || !a.contains("index") ||
            !non_negative(a["index"]))
          fail(ErrorCode::SchemaError, "accept items are {\"list\": objects|patterns, \"index\": n}");
        picks.emplace_back(parse_list(a["list"]), a["index"].get<std::size_t>());
      }
    }
    if (body.contains("text")) {
      if (!body["text"].is_string()) fail(ErrorCode::SchemaError, "text must be a string");
      text = body["text"].get<std::string>();
    }
  } catch (const Error& e) {
    reject(400, ErrorCode::SchemaError, e.what(), {{"violations", {e.what()}}});
  }
  if (!picks.empty() && !s->suggestions) reject(409, ErrorCode::StaleState, "no suggestions to accept from yet");

  ideation::IdeaDescription idea;
  try {
    auto refs = picks.empty() ? std::vector<ideation::SuggestionRef>{} : ideation::resolve_refs(*s->suggestions, picks);
    if (text && !text::trim(*text).empty() && refs.empty()) {
      idea.intent = s->intent;
      idea.text = *text;
    } else {
      idea = ideation::compose_idea(s->intent, std::move(refs));
      if (text && !text::trim(*text).empty()) idea = ideation::edit_idea(std::move(idea), *text);
    }
  } catch (const Error& e) {
    rethrow_with(400, e);
  }
  s->idea = idea;
  persist(*s);
  return idea_json(idea);
}

json Studio::references(const std::string& id, const std::string& mode, const std::string& suffix, int count) {
  if (mode != "retrieved" && mode != "generated" && mode != "both")
    reject(400, ErrorCode::InvalidArgument, "mode must be retrieved, generated or both");
  auto s = session(id);
  std::lock_guard lock(s->mu);
  if (!s->idea) reject(409, ErrorCode::StaleState, "confirm an idea before exploring references");

  json out = {{"mode", mode}, {"idea", s->idea->text}};
  if (mode != "generated") {
    const Eigen::VectorXd q = gateway::embed(retrieval::EmbedItem::from_text(s->idea->text), gateway_->embed);
    const auto hits = retrieval::search(*index_, q, cfg_.k_retrieve);
    s->retrieved.clear();
    json list = json::array();
    for (const auto& h : hits) {
      const auto* w = kb_->find_work(h.work_id);
      Reference r{"work:" + h.work_id, RefOrigin::Retrieved, h.work_id,
                  w ? cfg_.data_dir / w->image_ref : std::filesystem::path(), h.score, h.rank};
      json j = reference_json(r);
      if (w) j["title"] = w->title;
      list.push_back(std::move(j));
      s->retrieved.push_back(std::move(r));
    }
    out["retrieved"] = std::move(list);
  }
  if (mode != "retrieved") {
    try {
      gateway::GenerationRequest req;
      req.prompt = gateway::build_generation_prompt(*s->idea, suffix);
      req.count = count;
      const auto paths = gateway::generate_images(req, gateway_->generate);
      s->generated.clear();
      json list = json::array();
      for (const auto& p : paths) {
        Reference r{"gen:" + p.filename().string(), RefOrigin::Generated, {}, p, 0, 0};
        list.push_back(reference_json(r));
        s->generated.push_back(std::move(r));
      }
      out["generated"] = std::move(list);
      out["prompt"] = req.prompt;
    } catch (const Error& e) {
      s->log.record(std::string("generation: ") + e.what());
      if (mode == "generated") rethrow_with(e.code() == ErrorCode::InvalidArgument ? 400 : 502, e);
      out["generated"] = json::array();
      out["generated_error"] = error_body(e)["error"];
    }
  }
  persist(*s);
  return out;
}

std::filesystem::path Studio::resolve_image(const Session& s, const std::string& ref) const {
  if (ref.rfind("work:", 0) == 0) {
    const auto* w = kb_->find_work(ref.substr(5));
    if (!w) reject(404, ErrorCode::UnknownId, "no work '" + ref.substr(5) + "'");
    return cfg_.data_dir / w->image_ref;
  }
  if (ref.rfind("gen:", 0) == 0)
    for (const auto& r : s.generated)
      if (r.ref == ref) return r.image;
  reject(404, ErrorCode::UnknownId, "image '" + ref + "' is not known to this session or the corpus");
}

json Studio::segment(const std::string& id, const json& body) {
  auto s = session(id);
  std::lock_guard lock(s->mu);
  std::string ref;
  std::vector<Pixel> fg, bg;
  double tolerance = pattern::kDefaultSimplifyTolerance;
  try {
    if (!body.is_object() || !body.contains("image") || !body["image"].is_string())
      fail(ErrorCode::SchemaError, "body needs an image reference");
    ref = body["image"];
    fg = parse_points(body, "fg");
    bg = parse_points(body, "bg");
    if (body.contains("tolerance")) {
      if (!body["tolerance"].is_number() || body["tolerance"].get<double>() < 0)
        fail(ErrorCode::SchemaError, "tolerance must be a non-negative number");
      tolerance = body["tolerance"];
    }
  } catch (const Error& e) {
    reject(400, ErrorCode::SchemaError, e.what(), {{"violations", {e.what()}}});
  }
  const auto path = resolve_image(*s, ref);
  const GrayImage image = image_io::read_gray(path);

  gateway::SegmentResult res{BinaryImage(1, 1), gateway::SegmentSource::Fallback, {}};
  try {
    res = gateway::segment(image, fg, bg, gateway_->segment);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) rethrow_with(400, e);
    if (e.cause() == ErrorCode::PointOnOppositeClass)
      throw ServiceError(422, ErrorCode::PointOnOppositeClass, e.what(), nullptr, e.code());
    if (e.cause() == ErrorCode::InvalidArgument) rethrow_with(400, e);
    rethrow_with(422, e);
  }
  if (!res.fault.empty()) s->log.record("segmentation: " + res.fault);

  const pattern::VectorPath vec = pattern::vectorize(res.mask, tolerance);
  const BinaryImage back = pattern::rasterize(vec, res.mask.width(), res.mask.height());
  std::size_t mismatch = 0;
  for (int y = 0; y < back.height(); ++y)
    for (int x = 0; x < back.width(); ++x) mismatch += back.at(x, y) != res.mask.at(x, y);

  moodboard::Element e;
  e.path = vec;
  e.provenance.source = moodboard::Source::Extracted;
  if (ref.rfind("work:", 0) == 0) e.provenance.work_id = ref.substr(5);
  json element = moodboard::to_json(e);
  element.erase("id");

  const BBox box = res.mask.bbox();
  return {{"image", ref},
          {"source", gateway::to_string(res.source)},
          {"fault", res.fault},
          {"mask",
           {{"width", res.mask.width()},
            {"height", res.mask.height()},
            {"area", res.mask.count()},
            {"bbox", {{"x", box.x}, {"y", box.y}, {"w", box.w}, {"h", box.h}}},
            {"pbm_base64", gateway::base64_encode(image_io::encode_pbm(res.mask))}}},
          {"round_trip_mismatch", mismatch},
          {"element", std::move(element)}};
}

json Studio::work_patterns(const std::string& work_id) {
  {
    std::lock_guard lock(patterns_mu_);
    if (auto it = patterns_cache_.find(work_id); it != patterns_cache_.end()) return it->second;
  }
  if (!kb_->find_work(work_id)) reject(404, ErrorCode::UnknownId, "no work '" + work_id + "'");
  const WorkPatterns wp = extract_work_patterns(*kb_, cfg_.data_dir, work_id, exemplars_);
  json manifest = manifest_json(wp);
  for (std::size_t i = 0; i < wp.cutouts.size(); ++i) {
    moodboard::Element e;
    e.kind = moodboard::ElementKind::Cutout;
    e.fill = moodboard::Fill::Hole;
    e.path = wp.cutouts[i].path;
    e.provenance = {moodboard::Source::Extracted, work_id, wp.cutouts[i].cutout.cutout_id};
    json element = moodboard::to_json(e);
    element.erase("id");
    manifest["cutouts"][i]["element"] = std::move(element);
  }
  std::lock_guard lock(patterns_mu_);
  return patterns_cache_.emplace(work_id, std::move(manifest)).first->second;
}

void Studio::check_version(const Session& s, const json& body) {
  if (!body.is_object() || !body.contains("version")) return;
  if (!non_negative(body["version"])) reject(400, ErrorCode::SchemaError, "version must be a non-negative integer");
  const auto v = body["version"].get<std::size_t>();
  if (v != s.version)
    reject(409, ErrorCode::StaleState,
           "board is at version " + std::to_string(s.version) + ", request was based on " + std::to_string(v),
           {{"current_version", s.version}});
}

json Studio::board_op(const std::string& id, const std::string& op, const json& body) {
  auto s = session(id);
  if (!body.is_object()) reject(400, ErrorCode::SchemaError, "body must be a JSON object");
  std::lock_guard lock(s->mu);
  check_version(*s, body);
  json args = body;
  args.erase("version");
  std::string created;
  try {
    s->board.apply({op, args}, &created);
  } catch (const Error& e) {
    rethrow_with(422, e);
  }
  const auto problems = moodboard::check_invariants(s->board.current());
  if (!problems.empty()) reject(500, ErrorCode::Conflict, "board invariant broken: " + problems.front());
  ++s->version;
  persist(*s);
  json out = {{"version", s->version}, {"op", op}};
  if (!created.empty()) out["created_id"] = created;
  return out;
}

json Studio::undo(const std::string& id, const json& body) {
  auto s = session(id);
  std::lock_guard lock(s->mu);
  check_version(*s, body);
  if (!s->board.undo()) reject(409, ErrorCode::Conflict, "nothing to undo");
  ++s->version;
  persist(*s);
  return {{"version", s->version}, {"op_count", s->board.log().size()}};
}

json Studio::board(const std::string& id) {
  auto s = session(id);
  std::lock_guard lock(s->mu);
  return {{"version", s->version}, {"board", moodboard::to_json(s->board.current())}};
}

std::string Studio::export_svg(const std::string& id, double scale) {
  auto s = session(id);
  std::lock_guard lock(s->mu);
  moodboard::ExportOptions opts;
  opts.scale = scale;
  try {
    return moodboard::export_svg(s->board.current(), opts);
  } catch (const Error& e) {
    rethrow_with(400, e);
  }
}

}  // namespace cutstudio::studio
