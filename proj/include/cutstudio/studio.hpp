#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cutstudio/error.hpp"
#include "cutstudio/gateway.hpp"
#include "cutstudio/ideation.hpp"
#include "cutstudio/knowledge_base.hpp"
#include "cutstudio/moodboard.hpp"
#include "cutstudio/pattern_engine.hpp"
#include "cutstudio/retrieval.hpp"

namespace cutstudio::studio {

// --- corpus plumbing -----------------------------------------------------------

/// "images/w01.pgm#12,34" -> path and optional anchor pixel inside the cut-out.
struct GeometryRef {
  std::string path;
  std::optional<Pixel> anchor;
};
GeometryRef parse_geometry_ref(const std::string& ref);

/// One labeled descriptor per pattern annotation whose anchor lands in a
/// cut-out of its image. Annotations without a usable anchor are skipped.
std::vector<pattern::LabeledDescriptor> pattern_exemplars(const kb::KnowledgeBase& kb,
                                                          const std::filesystem::path& data_dir);

struct CutoutRecord {
  pattern::CutoutMask cutout;
  pattern::VectorPath path;  ///< image coordinates
  pattern::ShapeDescriptor descriptor;
  std::optional<pattern::Classification> classification;
  pattern::SawtoothResult sawtooth;
  const kb::PatternAnnotation* annotation = nullptr;
};

struct WorkPatterns {
  std::string work_id;
  int width = 0;
  int height = 0;
  int threshold = 0;
  std::vector<CutoutRecord> cutouts;
};

/// Binarize, extract cut-outs (ids "<work>-c<k>"), vectorize, describe and
/// classify against `exemplars` (skipped when there are fewer than k).
WorkPatterns extract_work_patterns(const kb::KnowledgeBase& kb, const std::filesystem::path& data_dir,
                                   const std::string& work_id,
                                   const std::vector<pattern::LabeledDescriptor>& exemplars,
                                   std::size_t k = pattern::kDefaultNeighbours);

/// Same pipeline on an image outside the corpus; `anchors` attach annotations
/// to the cut-outs containing them.
WorkPatterns extract_image_patterns(const GrayImage& img, const std::string& work_id,
                                    const std::vector<pattern::LabeledDescriptor>& exemplars,
                                    std::size_t k = pattern::kDefaultNeighbours,
                                    const std::vector<std::pair<Pixel, const kb::PatternAnnotation*>>& anchors = {});

/// Manifest entry list; `mask_dir`, when set, names the written PBM files.
nlohmann::json manifest_json(const WorkPatterns& wp, const std::string& mask_dir = {});

/// Index items for every work: image path and {title, region, caption}.
std::vector<retrieval::IndexItem> index_items(const kb::KnowledgeBase& kb, const std::filesystem::path& data_dir);

/// queries.jsonl: schema header then {"query_text", "gt_id"} records.
std::vector<retrieval::QueryPair> load_queries(const std::filesystem::path& path);

// --- configuration -------------------------------------------------------------

struct Listen {
  std::string host = "127.0.0.1";
  int port = 8080;
};
/// "host:port" or ":port". Throws InvalidArgument.
Listen parse_listen(const std::string& spec);

inline gateway::ProviderConfig provider_defaults(gateway::ProviderKind kind) {
  gateway::ProviderConfig c;
  c.kind = kind;
  return c;
}

struct ServiceConfig {
  std::filesystem::path data_dir = "data/reference";
  std::filesystem::path cache_dir = ".cutstudio-cache";
  /// One JSON document per session; empty keeps sessions in memory only.
  std::filesystem::path session_dir = ".cutstudio-sessions";
  /// Prebuilt index sidecar; built from the corpus when empty or missing.
  std::filesystem::path index_path;
  Listen listen;
  bool offline = false;
  std::size_t k_retrieve = retrieval::kDefaultTopK;
  gateway::ProviderConfig text = provider_defaults(gateway::ProviderKind::Text);
  gateway::ProviderConfig embed = provider_defaults(gateway::ProviderKind::Embed);
  gateway::ProviderConfig generate = provider_defaults(gateway::ProviderKind::Generate);
  gateway::ProviderConfig segment = provider_defaults(gateway::ProviderKind::Segment);

  /// Throws InvalidArgument when k_retrieve is 0 or a provider config is bad.
  void validate() const;

  /// HC_DATA_DIR, HC_CACHE_DIR, HC_LISTEN, HC_OFFLINE and the provider
  /// variables.
  static ServiceConfig from_env(const gateway::EnvLookup& env = gateway::process_env);
};

// --- service ---------------------------------------------------------------------

/// Library error annotated with the HTTP status it maps to.
class ServiceError : public Error {
 public:
  ServiceError(int status, ErrorCode code, const std::string& message, nlohmann::json details = nullptr,
               std::optional<ErrorCode> cause = std::nullopt)
      : Error(code, message, cause), status_(status), details_(std::move(details)) {}
  int status() const { return status_; }
  const nlohmann::json& details() const { return details_; }

 private:
  int status_;
  nlohmann::json details_;
};

/// Default status for a library error outside any endpoint-specific rule.
int http_status(const Error& e);

/// {"error": {"code", "message", ...details}}.
nlohmann::json error_body(const Error& e);

enum class RefOrigin { Retrieved, Generated };
std::string_view to_string(RefOrigin o);

struct Reference {
  std::string ref;  ///< "work:<id>" or "gen:<file name>"
  RefOrigin origin = RefOrigin::Retrieved;
  std::string work_id;
  std::filesystem::path image;
  double score = 0;
  std::size_t rank = 0;
};

struct Session {
  std::string id;
  std::mutex mu;  ///< serializes every read-modify-write of this session
  ideation::DesignIntent intent;
  std::optional<ideation::SuggestionSet> suggestions;
  std::optional<ideation::IdeaDescription> idea;
  std::vector<Reference> retrieved;
  std::vector<Reference> generated;
  moodboard::BoardHistory board;
  /// Optimistic-concurrency token, bumped by every board mutation and undo.
  std::size_t version = 0;
  ideation::SessionLog log;
};

/// Workflow core behind the HTTP API. Sessions run in parallel; calls on one
/// session are serialized. Board mutations take an optional version token and
/// fail with 409 when it is stale.
class Studio {
 public:
  Studio(ServiceConfig cfg, std::shared_ptr<const kb::KnowledgeBase> kb,
         std::shared_ptr<const retrieval::RetrievalIndex> index, std::shared_ptr<gateway::Gateway> gateway);

  /// Loads the corpus and the index (building it when needed).
  static std::unique_ptr<Studio> open(ServiceConfig cfg, std::shared_ptr<gateway::Transport> transport,
                                      gateway::Sleeper sleeper = {});

  const ServiceConfig& config() const { return cfg_; }
  const kb::KnowledgeBase& knowledge_base() const { return *kb_; }
  const retrieval::RetrievalIndex& index() const { return *index_; }
  gateway::Gateway& providers() { return *gateway_; }

  nlohmann::json health() const;
  nlohmann::json create_session(const nlohmann::json& body = nlohmann::json::object());
  nlohmann::json get_session(const std::string& id);
  nlohmann::json set_intent(const std::string& id, const nlohmann::json& body);
  nlohmann::json set_idea(const std::string& id, const nlohmann::json& body);
  /// mode: retrieved | generated | both.
  nlohmann::json references(const std::string& id, const std::string& mode, const std::string& suffix = {},
                            int count = gateway::GenerationRequest{}.count);
  nlohmann::json segment(const std::string& id, const nlohmann::json& body);
  nlohmann::json work_patterns(const std::string& work_id);
  nlohmann::json board_op(const std::string& id, const std::string& op, const nlohmann::json& body);
  nlohmann::json undo(const std::string& id, const nlohmann::json& body = nlohmann::json::object());
  nlohmann::json board(const std::string& id);
  std::string export_svg(const std::string& id, double scale = 1.0);

 private:
  std::shared_ptr<Session> session(const std::string& id);
  void persist(const Session& s) const;
  std::filesystem::path resolve_image(const Session& s, const std::string& ref) const;
  static void check_version(const Session& s, const nlohmann::json& body);

  ServiceConfig cfg_;
  std::shared_ptr<const kb::KnowledgeBase> kb_;
  std::shared_ptr<const retrieval::RetrievalIndex> index_;
  std::shared_ptr<gateway::Gateway> gateway_;
  std::vector<pattern::LabeledDescriptor> exemplars_;

  std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex patterns_mu_;
  std::map<std::string, nlohmann::json> patterns_cache_;
};

/// Session fields other than the board, as stored next to the op log.
nlohmann::json session_state_json(const Session& s);

}  // namespace cutstudio::studio
