#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cutstudio/ideation.hpp"
#include "cutstudio/image.hpp"
#include "cutstudio/retrieval.hpp"

namespace cutstudio::gateway {

enum class ProviderKind { Text, Embed, Generate, Segment };
std::string_view to_string(ProviderKind k);

/// Environment lookup; defaults to the process environment.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Text;
  std::string endpoint;        ///< http(s) URL; empty means no live provider
  std::string credential_ref;  ///< name of the env var holding the API key
  double timeout_s = 30;
  int max_retries = 2;
  std::filesystem::path cache_dir = ".cutstudio-cache";
  bool offline = false;
  /// Embedding only: output dimension, and whether offline misses fall back
  /// to the deterministic mock embedder.
  std::size_t embed_dim = 64;
  bool mock_when_offline = true;
  std::string model;
  double backoff_base_s = 0.5;  ///< delay before retry i (0-based) is base * 2^i
  std::size_t max_in_flight = 4;

  /// Throws InvalidArgument on timeout <= 0, max_retries < 0 or a zero limit.
  void validate() const;

  /// HC_TEXT_ENDPOINT / HC_EMBED_ENDPOINT / HC_GEN_ENDPOINT / HC_SEG_ENDPOINT,
  /// HC_API_KEY_{TEXT,EMBED,GEN,SEG}, HC_CACHE_DIR, HC_OFFLINE (1/true/yes).
  static ProviderConfig from_env(ProviderKind kind, const EnvLookup& env = process_env);
};

struct HttpRequest {
  std::string url;
  std::string body;
  std::map<std::string, std::string> headers;
  double timeout_s = 30;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// POST transport. Implementations throw Error(Timeout) when the deadline
/// passes and Error(ProviderError) when the connection fails.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib client (http and https).
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override;
};

/// Content-addressed store: <dir>/<kind>/<key>.json holds the raw provider
/// payload. The same layout serves as the replay fixture format.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<std::string> get(ProviderKind kind, const std::string& key) const;
  void put(ProviderKind kind, const std::string& key, const std::string& payload) const;
  std::filesystem::path path_for(ProviderKind kind, const std::string& key) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// SHA-256 over the kind and the canonical (sorted-key) request JSON.
std::string cache_key(ProviderKind kind, const nlohmann::json& request);

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

using Sleeper = std::function<void(std::chrono::duration<double>)>;

struct CallStats {
  std::size_t network_attempts = 0;
  std::size_t cache_hits = 0;
};

/// Shareable handle for one provider: cache lookup, offline gating, retries
/// with jitterless exponential backoff, and an in-flight limit. Requests with
/// equal payloads are serialized so only the first reaches the network.
class ProviderClient {
 public:
  ProviderClient(ProviderConfig cfg, std::shared_ptr<Transport> transport, Sleeper sleeper = {});

  const ProviderConfig& config() const { return cfg_; }
  const ResponseCache& cache() const { return cache_; }

  /// Raw provider payload for `request`. Throws OfflineMiss, Timeout or
  /// ProviderError(status).
  std::string call(const nlohmann::json& request);

  /// Cached payload, if any, without touching the network.
  std::optional<std::string> cached(const nlohmann::json& request) const;

  CallStats stats() const;

 private:
  std::string fetch(const nlohmann::json& request);
  std::shared_ptr<std::mutex> key_lock(const std::string& key);

  ProviderConfig cfg_;
  ResponseCache cache_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::counting_semaphore<1024> in_flight_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
  CallStats stats_;
};

// --- text ------------------------------------------------------------------

/// Chat-style request: system preamble, exemplar question/answer turns, then
/// the user block.
nlohmann::json text_request(const ideation::PromptBundle& bundle, const ProviderConfig& cfg);
std::string suggest_text(const ideation::PromptBundle& bundle, ProviderClient& client);

/// Adapter for ideation::request_suggestions.
ideation::TextProvider text_provider(ProviderClient& client);

// --- generation ------------------------------------------------------------

inline constexpr std::string_view kStyleClause =
    "monochrome Chinese paper-cutting, white background, connected silhouette";

struct GenerationRequest {
  std::string prompt;
  int count = 4;
  int width = 1024;
  int height = 1024;
};

/// Style clause, idea text, then the user's suffix. Throws EmptyIdea.
std::string build_generation_prompt(const ideation::IdeaDescription& idea, const std::string& user_suffix = {});

nlohmann::json generation_request(const GenerationRequest& req, const ProviderConfig& cfg);

/// Images saved under <cache_dir>/images/<sha256>.<ext>, provider order.
/// Throws InvalidArgument unless 1 <= count <= 8.
std::vector<std::filesystem::path> generate_images(const GenerationRequest& req, ProviderClient& client);

// --- embedding -------------------------------------------------------------

nlohmann::json embed_request(const retrieval::EmbedItem& item, const ProviderConfig& cfg);

/// Provider embedding; offline misses use the mock embedder when allowed.
Eigen::VectorXd embed(const retrieval::EmbedItem& item, ProviderClient& client);

/// retrieval::Embedder backed by a provider client.
class GatewayEmbedder final : public retrieval::Embedder {
 public:
  explicit GatewayEmbedder(ProviderClient& client) : client_(client) {}
  std::size_t dim() const override { return client_.config().embed_dim; }
  Eigen::VectorXd embed(const retrieval::EmbedItem& item) override { return gateway::embed(item, client_); }

 private:
  ProviderClient& client_;
};

// --- segmentation ----------------------------------------------------------

enum class SegmentSource { Provider, Fallback };
std::string_view to_string(SegmentSource s);

struct SegmentResult {
  BinaryImage mask;
  SegmentSource source = SegmentSource::Fallback;
  std::string fault;  ///< why the provider route was abandoned, if it was
};

nlohmann::json segment_request(const GrayImage& image, const std::vector<Pixel>& fg, const std::vector<Pixel>& bg,
                               const ProviderConfig& cfg);

/// Provider mask when it honours every point; otherwise the classical
/// fallback on the binarized image. Throws SegmentationFailed (with the
/// fallback's error as cause) when neither route works.
SegmentResult segment(const GrayImage& image, const std::vector<Pixel>& fg, const std::vector<Pixel>& bg,
                      ProviderClient& client);

/// All four provider clients, configured from the environment.
struct Gateway {
  ProviderClient text;
  ProviderClient embed;
  ProviderClient generate;
  ProviderClient segment;

  Gateway(const EnvLookup& env, std::shared_ptr<Transport> transport, Sleeper sleeper = {});
  Gateway(ProviderConfig text_cfg, ProviderConfig embed_cfg, ProviderConfig gen_cfg, ProviderConfig seg_cfg,
          std::shared_ptr<Transport> transport, Sleeper sleeper = {});
};

}  // namespace cutstudio::gateway
