#include "cutstudio/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <variant>

#include <httplib.h>
#include <openssl/evp.h>

#include "cutstudio/error.hpp"
#include "cutstudio/pattern_engine.hpp"
#include "cutstudio/text.hpp"

namespace cutstudio::gateway {

using nlohmann::json;

std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::Text: return "text";
    case ProviderKind::Embed: return "embed";
    case ProviderKind::Generate: return "generate";
    case ProviderKind::Segment: return "segment";
  }
  return "?";
}

std::string_view to_string(SegmentSource s) { return s == SegmentSource::Provider ? "provider" : "fallback"; }

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

void ProviderConfig::validate() const {
  if (!(timeout_s > 0)) fail(ErrorCode::InvalidArgument, "provider timeout must be positive");
  if (max_retries < 0) fail(ErrorCode::InvalidArgument, "max_retries must be non-negative");
  if (max_in_flight == 0 || max_in_flight > 1024) fail(ErrorCode::InvalidArgument, "max_in_flight must be in 1..1024");
  if (kind == ProviderKind::Embed && embed_dim == 0) fail(ErrorCode::InvalidArgument, "embed_dim must be positive");
}

ProviderConfig ProviderConfig::from_env(ProviderKind kind, const EnvLookup& env) {
  static const std::map<ProviderKind, std::pair<const char*, const char*>> names = {
      {ProviderKind::Text, {"HC_TEXT_ENDPOINT", "HC_API_KEY_TEXT"}},
      {ProviderKind::Embed, {"HC_EMBED_ENDPOINT", "HC_API_KEY_EMBED"}},
      {ProviderKind::Generate, {"HC_GEN_ENDPOINT", "HC_API_KEY_GEN"}},
      {ProviderKind::Segment, {"HC_SEG_ENDPOINT", "HC_API_KEY_SEG"}},
  };
  ProviderConfig cfg;
  cfg.kind = kind;
  const auto& [endpoint_var, key_var] = names.at(kind);
  cfg.endpoint = env(endpoint_var).value_or("");
  cfg.credential_ref = key_var;
  if (auto dir = env("HC_CACHE_DIR"); dir && !dir->empty()) cfg.cache_dir = *dir;
  if (auto off = env("HC_OFFLINE")) {
    std::string v = text::trim(*off);
    for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    cfg.offline = v == "1" || v == "true" || v == "yes" || v == "on";
  }
  cfg.validate();
  return cfg;
}

// --- hashing and encoding ---------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    fail(ErrorCode::IoError, "SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) fail(ErrorCode::ProviderError, "malformed base64 payload");
  std::string out(3 * clean.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
  if (n < 0) fail(ErrorCode::ProviderError, "malformed base64 payload");
  std::size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string cache_key(ProviderKind kind, const json& request) {
  return sha256_hex(std::string(to_string(kind)) + "\n" + request.dump());
}

// --- cache ------------------------------------------------------------------

std::filesystem::path ResponseCache::path_for(ProviderKind kind, const std::string& key) const {
  return dir_ / std::string(to_string(kind)) / (key + ".json");
}

std::optional<std::string> ResponseCache::get(ProviderKind kind, const std::string& key) const {
  std::ifstream in(path_for(kind, key), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void ResponseCache::put(ProviderKind kind, const std::string& key, const std::string& payload) const {
  const auto path = path_for(kind, key);
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorCode::IoError, "cannot create cache directory " + path.parent_path().string());
  // Write-then-rename so readers never see a partial entry.
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) fail(ErrorCode::IoError, "cannot write cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::IoError, "cannot commit cache entry " + path.string());
}

// --- transport --------------------------------------------------------------

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::InvalidArgument, "endpoint is not a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse HttpTransport::post(const HttpRequest& request) {
  const Url url = split_url(request.url);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration<double>(request.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  auto res = client.Post(url.path, headers, request.body, "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
      fail(ErrorCode::Timeout, "request to " + request.url + " timed out");
    fail(ErrorCode::ProviderError, "request to " + request.url + " failed: " + httplib::to_string(err));
  }
  return {res->status, res->body};
}

// --- client -----------------------------------------------------------------

ProviderClient::ProviderClient(ProviderConfig cfg, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      cache_(cfg_.cache_dir),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      in_flight_(static_cast<std::ptrdiff_t>(cfg_.max_in_flight)) {
  cfg_.validate();
  if (!sleeper_) sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

std::shared_ptr<std::mutex> ProviderClient::key_lock(const std::string& key) {
  std::lock_guard lock(mu_);
  auto& m = key_locks_[key];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

CallStats ProviderClient::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::optional<std::string> ProviderClient::cached(const json& request) const {
  return cache_.get(cfg_.kind, cache_key(cfg_.kind, request));
}

std::string ProviderClient::call(const json& request) {
  const std::string key = cache_key(cfg_.kind, request);
  const auto lock = key_lock(key);
  std::lock_guard guard(*lock);
  if (auto hit = cache_.get(cfg_.kind, key)) {
    std::lock_guard s(mu_);
    ++stats_.cache_hits;
    return *hit;
  }
  if (cfg_.offline || cfg_.endpoint.empty())
    fail(ErrorCode::OfflineMiss, std::string(to_string(cfg_.kind)) + " request " + key.substr(0, 12) +
                                     (cfg_.offline ? " not in cache (offline)" : " not in cache and no endpoint set"));
  std::string payload = fetch(request);
  cache_.put(cfg_.kind, key, payload);
  return payload;
}

std::string ProviderClient::fetch(const json& request) {
  HttpRequest http{cfg_.endpoint, request.dump(), {{"Accept", "application/json"}}, cfg_.timeout_s};
  if (!cfg_.credential_ref.empty())
    if (auto key = process_env(cfg_.credential_ref); key && !key->empty())
      http.headers["Authorization"] = "Bearer " + *key;

  // Timeouts, connection failures, 429 and 5xx are retried; other statuses are final.
  for (int attempt = 0;; ++attempt) {
    std::optional<HttpResponse> res;
    std::optional<Error> err;
    in_flight_.acquire();
    try {
      {
        std::lock_guard s(mu_);
        ++stats_.network_attempts;
      }
      res = transport_->post(http);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Timeout && e.code() != ErrorCode::ProviderError) {
        in_flight_.release();
        throw;
      }
      err = e;
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();

    if (res) {
      if (res->status >= 200 && res->status < 300) return std::move(res->body);
      err = Error(ErrorCode::ProviderError, "ProviderError(" + std::to_string(res->status) + ") from " + cfg_.endpoint);
      if (res->status != 429 && res->status < 500) throw *err;
    }
    if (attempt >= cfg_.max_retries) throw *err;
    sleeper_(std::chrono::duration<double>(cfg_.backoff_base_s * std::ldexp(1.0, attempt)));
  }
}

// --- text -------------------------------------------------------------------

json text_request(const ideation::PromptBundle& bundle, const ProviderConfig& cfg) {
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", bundle.system_preamble}});
  for (const auto& [q, a] : bundle.exemplars) {
    messages.push_back({{"role", "user"}, {"content", q}});
    messages.push_back({{"role", "assistant"}, {"content", a}});
  }
  messages.push_back({{"role", "user"}, {"content", bundle.user_block}});
  json req = {{"messages", messages}};
  if (!cfg.model.empty()) req["model"] = cfg.model;
  return req;
}

namespace {

void require_kind(const ProviderClient& client, ProviderKind kind) {
  if (client.config().kind != kind)
    fail(ErrorCode::InvalidArgument, "client is configured for " + std::string(to_string(client.config().kind)) +
                                         ", not " + std::string(to_string(kind)));
}

json parse_payload(const std::string& payload) {
  try {
    return json::parse(payload);
  } catch (const json::exception& e) {
    fail(ErrorCode::ProviderError, std::string("provider payload is not JSON: ") + e.what());
  }
}

}  // namespace

std::string suggest_text(const ideation::PromptBundle& bundle, ProviderClient& client) {
  require_kind(client, ProviderKind::Text);
  const json reply = parse_payload(client.call(text_request(bundle, client.config())));
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    fail(ErrorCode::ProviderError, "text reply has no choices[0].message.content");
  }
}

ideation::TextProvider text_provider(ProviderClient& client) {
  return [&client](const ideation::PromptBundle& bundle) { return suggest_text(bundle, client); };
}

// --- generation -------------------------------------------------------------

std::string build_generation_prompt(const ideation::IdeaDescription& idea, const std::string& user_suffix) {
  const std::string body = text::trim(idea.text);
  if (body.empty()) fail(ErrorCode::EmptyIdea, "idea text is empty");
  std::string prompt = std::string(kStyleClause) + ". " + body;
  if (!user_suffix.empty()) prompt += ". " + user_suffix;
  return prompt;
}

json generation_request(const GenerationRequest& req, const ProviderConfig& cfg) {
  json j = {{"prompt", req.prompt},
            {"n", req.count},
            {"size", std::to_string(req.width) + "x" + std::to_string(req.height)},
            {"response_format", "b64_json"}};
  if (!cfg.model.empty()) j["model"] = cfg.model;
  return j;
}

std::vector<std::filesystem::path> generate_images(const GenerationRequest& req, ProviderClient& client) {
  require_kind(client, ProviderKind::Generate);
  if (req.count < 1 || req.count > 8) fail(ErrorCode::InvalidArgument, "image count must be in 1..8");
  if (req.width < 1 || req.height < 1) fail(ErrorCode::InvalidArgument, "image size must be positive");
  if (text::trim(req.prompt).empty()) fail(ErrorCode::EmptyIdea, "generation prompt is empty");

  const json reply = parse_payload(client.call(generation_request(req, client.config())));
  std::vector<std::filesystem::path> out;
  const auto dir = client.cache().dir() / "images";
  std::filesystem::create_directories(dir);
  try {
    for (const auto& item : reply.at("data")) {
      const std::string bytes = base64_decode(item.at("b64_json").get<std::string>());
      const bool png = bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes.compare(1, 3, "PNG") == 0;
      const auto path = dir / (sha256_hex(bytes) + (png ? ".png" : bytes.rfind("P", 0) == 0 ? ".pnm" : ".bin"));
      if (!std::filesystem::exists(path)) {
        std::ofstream f(path, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) fail(ErrorCode::IoError, "cannot store generated image " + path.string());
      }
      out.push_back(path);
    }
  } catch (const json::exception&) {
    fail(ErrorCode::ProviderError, "generation reply has no data[].b64_json");
  }
  if (out.empty()) fail(ErrorCode::ProviderError, "generation reply contained no images");
  return out;
}

// --- embedding --------------------------------------------------------------

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

json embed_request(const retrieval::EmbedItem& item, const ProviderConfig& cfg) {
  json j;
  if (item.kind == retrieval::EmbedItem::Kind::Text) {
    j = {{"input", item.text}};
  } else {
    j = {{"image", base64_encode(read_file(item.image_ref))}};
    if (!item.text.empty()) j["caption"] = item.text;
  }
  j["dimensions"] = cfg.embed_dim;
  if (!cfg.model.empty()) j["model"] = cfg.model;
  return j;
}

Eigen::VectorXd embed(const retrieval::EmbedItem& item, ProviderClient& client) {
  require_kind(client, ProviderKind::Embed);
  const auto& cfg = client.config();
  const bool live = !cfg.offline && !cfg.endpoint.empty();
  if (!live && cfg.mock_when_offline) {
    // A warm cache still wins; otherwise the deterministic mock stands in.
    std::optional<std::string> hit;
    try {
      hit = client.cached(embed_request(item, cfg));
    } catch (const Error&) {
    }
    if (!hit) return retrieval::MockEmbedder(cfg.embed_dim).embed(item);
  }
  const json reply = parse_payload(client.call(embed_request(item, cfg)));
  std::vector<double> values;
  try {
    values = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception&) {
    fail(ErrorCode::ProviderError, "embedding reply has no data[0].embedding");
  }
  if (values.size() != cfg.embed_dim)
    fail(ErrorCode::DimensionMismatch, "provider returned dimension " + std::to_string(values.size()) +
                                           ", configured " + std::to_string(cfg.embed_dim));
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// --- segmentation -----------------------------------------------------------

json segment_request(const GrayImage& image, const std::vector<Pixel>& fg, const std::vector<Pixel>& bg,
                     const ProviderConfig& cfg) {
  json points = json::array();
  for (const auto& p : fg) points.push_back({{"x", p.x}, {"y", p.y}, {"label", 1}});
  for (const auto& p : bg) points.push_back({{"x", p.x}, {"y", p.y}, {"label", 0}});
  json j = {{"image", base64_encode(image_io::encode_pgm(image))},
            {"width", image.cols()},
            {"height", image.rows()},
            {"points", points}};
  if (!cfg.model.empty()) j["model"] = cfg.model;
  return j;
}

namespace {

/// Provider mask, or an explanation of why it cannot be used.
std::variant<BinaryImage, std::string> provider_mask(const GrayImage& image, const std::vector<Pixel>& fg,
                                                     const std::vector<Pixel>& bg, ProviderClient& client) {
  try {
    const json reply = parse_payload(client.call(segment_request(image, fg, bg, client.config())));
    const GrayImage g = image_io::decode_gray(base64_decode(reply.at("mask").get<std::string>()));
    if (g.rows() != image.rows() || g.cols() != image.cols()) return std::string("provider mask has the wrong size");
    BinaryImage mask(BinaryImage::Bits((g < 128).cast<std::uint8_t>()));
    for (const auto& p : fg)
      if (!mask.get(p.x, p.y)) return std::string("provider mask misses a foreground point");
    for (const auto& p : bg)
      if (mask.get(p.x, p.y)) return std::string("provider mask covers a background point");
    return mask;
  } catch (const Error& e) {
    return std::string(to_string(e.code())) + ": " + e.what();
  } catch (const std::exception& e) {
    return std::string("provider fault: ") + e.what();
  }
}

}  // namespace

SegmentResult segment(const GrayImage& image, const std::vector<Pixel>& fg, const std::vector<Pixel>& bg,
                      ProviderClient& client) {
  require_kind(client, ProviderKind::Segment);
  if (fg.empty()) fail(ErrorCode::InvalidArgument, "segmentation needs at least one foreground point");
  auto provided = provider_mask(image, fg, bg, client);
  if (auto* mask = std::get_if<BinaryImage>(&provided)) return {std::move(*mask), SegmentSource::Provider, {}};

  const std::string fault = std::get<std::string>(provided);
  try {
    return {pattern::segment_by_points(pattern::binarize(image), fg, bg), SegmentSource::Fallback, fault};
  } catch (const Error& e) {
    throw Error(ErrorCode::SegmentationFailed,
                "SegmentationFailed: provider (" + fault + "); fallback (" + std::string(to_string(e.code())) +
                    ": " + e.what() + ")",
                e.code());
  }
}

// --- bundle -----------------------------------------------------------------

Gateway::Gateway(const EnvLookup& env, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : Gateway(ProviderConfig::from_env(ProviderKind::Text, env), ProviderConfig::from_env(ProviderKind::Embed, env),
              ProviderConfig::from_env(ProviderKind::Generate, env),
              ProviderConfig::from_env(ProviderKind::Segment, env), std::move(transport), std::move(sleeper)) {}

Gateway::Gateway(ProviderConfig text_cfg, ProviderConfig embed_cfg, ProviderConfig gen_cfg, ProviderConfig seg_cfg,
                 std::shared_ptr<Transport> transport, Sleeper sleeper)
    : text(std::move(text_cfg), transport, sleeper),
      embed(std::move(embed_cfg), transport, sleeper),
      generate(std::move(gen_cfg), transport, sleeper),
      segment(std::move(seg_cfg), transport, sleeper) {}

}  // namespace cutstudio::gateway
