#include <doctest.h>

#include <fstream>
#include <map>
#include <thread>

#include "cutstudio/gateway.hpp"

// After Eigen: <resolv.h> defines a `_res` macro.
#include <httplib.h>

#include "cutstudio/pattern_engine.hpp"
#include "shapes.hpp"
#include "support.hpp"

using namespace cutstudio;
using namespace cutstudio::gateway;
using nlohmann::json;
using support::code_of;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

ProviderConfig config(ProviderKind kind, const std::filesystem::path& cache, bool offline = false) {
  ProviderConfig c;
  c.kind = kind;
  c.endpoint = "http://provider.invalid/v1";
  c.cache_dir = cache;
  c.offline = offline;
  return c;
}

HttpResponse chat_reply(const std::string& content) {
  return {200, json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump()};
}

ideation::PromptBundle bundle(const std::string& user) {
  ideation::PromptBundle b;
  b.system_preamble = "preamble";
  b.exemplars = {{"q1", "a1"}};
  b.user_block = user;
  return b;
}

}  // namespace

TEST_CASE("provider config from environment") {
  const auto cfg = ProviderConfig::from_env(
      ProviderKind::Generate,
      env_of({{"HC_GEN_ENDPOINT", "https://gen.example/v1/images"}, {"HC_CACHE_DIR", "/tmp/c"}, {"HC_OFFLINE", "1"}}));
  CHECK(cfg.endpoint == "https://gen.example/v1/images");
  CHECK(cfg.credential_ref == "HC_API_KEY_GEN");
  CHECK(cfg.cache_dir == "/tmp/c");
  CHECK(cfg.offline);
  CHECK_FALSE(ProviderConfig::from_env(ProviderKind::Text, env_of({{"HC_OFFLINE", "0"}})).offline);
  CHECK(ProviderConfig::from_env(ProviderKind::Embed, env_of({})).endpoint.empty());

  ProviderConfig bad;
  bad.timeout_s = 0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
  bad.timeout_s = 1;
  bad.max_retries = -1;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("hashing, encoding and cache keys") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(base64_encode("Man") == "TWFu");
  CHECK(base64_encode("Ma") == "TWE=");
  for (const std::string& s : std::vector<std::string>{"", "a", "ab", "abc", std::string("\0\xff\x10", 3)}) CHECK(base64_decode(base64_encode(s)) == s);

  json a = json::object();
  a["b"] = 1;
  a["a"] = "x";
  const json b = {{"a", "x"}, {"b", 1}};
  CHECK(cache_key(ProviderKind::Text, a) == cache_key(ProviderKind::Text, b));
  CHECK(cache_key(ProviderKind::Text, a) != cache_key(ProviderKind::Embed, a));
  CHECK(cache_key(ProviderKind::Text, a) != cache_key(ProviderKind::Text, json{{"a", "y"}, {"b", 1}}));
}

TEST_CASE("suggest_text: cache hit bypasses the network; offline gating") {
  support::TempDir tmp;
  auto transport = std::make_shared<support::ScriptedTransport>([](const HttpRequest& r) {
    const json body = json::parse(r.body);
    CHECK(body["messages"].size() == 4);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][3]["content"] == "hello");
    return chat_reply("OBJECTS:\n- magpie \xE2\x80\x94 joy");
  });
  ProviderClient online(config(ProviderKind::Text, tmp.path()), transport, support::no_sleep());
  CHECK(suggest_text(bundle("hello"), online).find("magpie") != std::string::npos);
  CHECK(suggest_text(bundle("hello"), online).find("magpie") != std::string::npos);
  CHECK(transport->calls == 1);
  CHECK(online.stats().cache_hits == 1);

  ProviderClient offline(config(ProviderKind::Text, tmp.path(), true), transport, support::no_sleep());
  CHECK(suggest_text(bundle("hello"), offline).find("magpie") != std::string::npos);
  CHECK(code_of([&] { suggest_text(bundle("other"), offline); }) == ErrorCode::OfflineMiss);
  CHECK(transport->calls == 1);

  // Wrong client kind is a usage error.
  CHECK(code_of([&] { generate_images({"x", 1}, online); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("retries: jitterless exponential backoff on 5xx, 429 and timeouts") {
  support::TempDir tmp;
  int n = 0;
  auto flaky = std::make_shared<support::ScriptedTransport>([&n](const HttpRequest&) {
    return ++n <= 2 ? HttpResponse{500, "boom"} : chat_reply("ok");
  });
  std::vector<double> sleeps;
  auto cfg = config(ProviderKind::Text, tmp.path());
  cfg.max_retries = 2;
  ProviderClient client(cfg, flaky, support::no_sleep(&sleeps));
  CHECK(suggest_text(bundle("a"), client) == "ok");
  CHECK(flaky->calls == 3);
  CHECK(sleeps == std::vector<double>{0.5, 1.0});

  n = 0;
  cfg.max_retries = 1;
  ProviderClient impatient(cfg, flaky, support::no_sleep());
  CHECK(code_of([&] { suggest_text(bundle("b"), impatient); }) == ErrorCode::ProviderError);

  auto bad_request = std::make_shared<support::ScriptedTransport>([](const HttpRequest&) {
    return HttpResponse{400, "nope"};
  });
  cfg.max_retries = 3;
  ProviderClient c400(cfg, bad_request, support::no_sleep());
  CHECK(code_of([&] { suggest_text(bundle("c"), c400); }) == ErrorCode::ProviderError);
  CHECK(bad_request->calls == 1);

  int t = 0;
  auto slow = std::make_shared<support::ScriptedTransport>([&t](const HttpRequest&) -> HttpResponse {
    if (++t == 1) fail(ErrorCode::Timeout, "slow");
    if (t == 2) return {429, "later"};
    return chat_reply("fine");
  });
  ProviderClient patient(cfg, slow, support::no_sleep());
  CHECK(suggest_text(bundle("d"), patient) == "fine");
  CHECK(slow->calls == 3);
}

TEST_CASE("http transport against a local fault-injection server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    CHECK(req.get_header_value("Content-Type") == "application/json");
    if (++hits <= 2) {
      res.status = 500;
      res.set_content("fault", "text/plain");
      return;
    }
    res.set_content(chat_reply("served").body, "application/json");
  });
  server.Post("/v1/slow", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(800));
    res.set_content(chat_reply("late").body, "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  support::TempDir tmp;
  auto cfg = config(ProviderKind::Text, tmp.path());
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
  cfg.max_retries = 2;
  cfg.backoff_base_s = 0.01;
  ProviderClient client(cfg, std::make_shared<HttpTransport>());
  CHECK(suggest_text(bundle("live"), client) == "served");
  CHECK(hits == 3);

  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/slow";
  cfg.timeout_s = 0.2;
  cfg.max_retries = 0;
  ProviderClient slow(cfg, std::make_shared<HttpTransport>());
  CHECK(code_of([&] { suggest_text(bundle("slow"), slow); }) == ErrorCode::Timeout);

  server.stop();
  th.join();
}

TEST_CASE("equal concurrent requests reach the network once") {
  support::TempDir tmp;
  auto transport = std::make_shared<support::ScriptedTransport>([](const HttpRequest&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    return chat_reply("once");
  });
  auto cfg = config(ProviderKind::Text, tmp.path());
  cfg.max_in_flight = 2;
  ProviderClient client(cfg, transport, support::no_sleep());
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&, i] {
      if (suggest_text(bundle(i % 2 ? "same" : "also same"), client) == "once") ++ok;
    });
  for (auto& t : threads) t.join();
  CHECK(ok == 8);
  CHECK(transport->calls == 2);
}

TEST_CASE("build_generation_prompt") {
  ideation::IdeaDescription idea;
  idea.text = "magpie and peony";
  const std::string p = build_generation_prompt(idea, "");
  CHECK(p.find(std::string(kStyleClause)) == 0);
  CHECK(p.find("magpie and peony") != std::string::npos);
  const std::string q = build_generation_prompt(idea, "symmetrical layout");
  CHECK(q.size() > p.size());
  CHECK(q.substr(q.size() - std::string("symmetrical layout").size()) == "symmetrical layout");
  CHECK(build_generation_prompt(idea, "x") == build_generation_prompt(idea, "x"));
  idea.text = "  ";
  CHECK(code_of([&] { build_generation_prompt(idea, "x"); }) == ErrorCode::EmptyIdea);
}

TEST_CASE("generate_images: content-addressed refs in provider order, cached") {
  support::TempDir tmp;
  const std::string img1 = image_io::encode_pgm(shapes::render(shapes::disk(8, 8, 4, 4, 3)));
  const std::string img2 = image_io::encode_pgm(shapes::render(shapes::rect(8, 8, 1, 1, 5, 5)));
  auto transport = std::make_shared<support::ScriptedTransport>([&](const HttpRequest& r) {
    const json body = json::parse(r.body);
    CHECK(body["n"] == 2);
    CHECK(body["size"] == "1024x1024");
    return HttpResponse{200, json{{"data", {{{"b64_json", base64_encode(img1)}}, {{"b64_json", base64_encode(img2)}}}}}.dump()};
  });
  ProviderClient client(config(ProviderKind::Generate, tmp.path()), transport, support::no_sleep());
  const GenerationRequest req{"prompt", 2};
  const auto refs = generate_images(req, client);
  REQUIRE(refs.size() == 2);
  CHECK(refs[0].stem() == sha256_hex(img1));
  CHECK(refs[1].stem() == sha256_hex(img2));
  CHECK(std::filesystem::exists(refs[0]));
  CHECK(generate_images(req, client) == refs);
  CHECK(transport->calls == 1);

  CHECK(code_of([&] { generate_images({"prompt", 0}, client); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { generate_images({"prompt", 9}, client); }) == ErrorCode::InvalidArgument);
  CHECK(GenerationRequest{}.count == 4);
  CHECK(GenerationRequest{}.width == 1024);
}

TEST_CASE("embed: offline mock, provider vectors, dimension checks") {
  support::TempDir tmp;
  auto dead = support::dead_network();
  auto cfg = config(ProviderKind::Embed, tmp.path(), true);
  ProviderClient offline(cfg, dead, support::no_sleep());
  const auto a = embed(retrieval::EmbedItem::from_text("red magpie"), offline);
  CHECK(a == embed(retrieval::EmbedItem::from_text("red magpie"), offline));
  CHECK(a != embed(retrieval::EmbedItem::from_text("plum blossom"), offline));
  CHECK(a == retrieval::MockEmbedder(64).embed(retrieval::EmbedItem::from_text("red magpie")));
  CHECK(dead->calls == 0);

  cfg.mock_when_offline = false;
  ProviderClient strict(cfg, dead, support::no_sleep());
  CHECK(code_of([&] { embed(retrieval::EmbedItem::from_text("x"), strict); }) == ErrorCode::OfflineMiss);

  auto provider = std::make_shared<support::ScriptedTransport>([](const HttpRequest& r) {
    const json body = json::parse(r.body);
    const std::size_t d = body.contains("input") && body["input"] == "short" ? 3 : 4;
    return HttpResponse{200, json{{"data", {{{"embedding", std::vector<double>(d, 0.5)}}}}}.dump()};
  });
  auto live_cfg = config(ProviderKind::Embed, tmp.path());
  live_cfg.embed_dim = 4;
  ProviderClient live(live_cfg, provider, support::no_sleep());
  CHECK(embed(retrieval::EmbedItem::from_text("ok"), live) == Eigen::VectorXd::Constant(4, 0.5));
  CHECK(code_of([&] { embed(retrieval::EmbedItem::from_text("short"), live); }) == ErrorCode::DimensionMismatch);

  // Image items reach the provider as base64 bytes and share the dimension.
  const auto img = tmp / "img.pgm";
  image_io::write_pgm(shapes::render(shapes::disk(6, 6, 3, 3, 2)), img);
  GatewayEmbedder adapter(live);
  CHECK(adapter.dim() == 4);
  CHECK(adapter.embed(retrieval::EmbedItem::from_image(img.string())).size() == 4);
  CHECK(json::parse(provider->last_body).contains("image"));
}

TEST_CASE("segment: provider mask, fault routing and fallback") {
  support::TempDir tmp;
  BinaryImage paper(40, 20);
  shapes::fill_rect(paper, 2, 2, 10, 10);
  shapes::fill_rect(paper, 20, 4, 12, 12);
  const GrayImage image = shapes::render(paper);
  const std::vector<Pixel> fg = {{5, 5}}, bg = {{25, 8}};

  // Offline: forced fallback honouring the points.
  ProviderClient offline(config(ProviderKind::Segment, tmp.path(), true), support::dead_network(), support::no_sleep());
  const auto off = segment(image, fg, bg, offline);
  CHECK(off.source == SegmentSource::Fallback);
  CHECK(off.mask.at(5, 5));
  CHECK_FALSE(off.mask.at(25, 8));

  // Provider answers with a valid mask: returned unchanged.
  BinaryImage provider_mask(40, 20);
  shapes::fill_rect(provider_mask, 4, 4, 3, 3);
  auto good = std::make_shared<support::ScriptedTransport>([&](const HttpRequest& r) {
    CHECK(json::parse(r.body)["points"].size() == 2);
    return HttpResponse{200, json{{"mask", base64_encode(image_io::encode_pbm(provider_mask))}}.dump()};
  });
  ProviderClient online(config(ProviderKind::Segment, tmp / "a"), good, support::no_sleep());
  const auto on = segment(image, fg, bg, online);
  CHECK(on.source == SegmentSource::Provider);
  CHECK(on.mask == provider_mask);

  // Provider mask that violates the point contract, and a crashing provider.
  BinaryImage wrong(40, 20, true);
  auto violating = std::make_shared<support::ScriptedTransport>([&](const HttpRequest&) {
    return HttpResponse{200, json{{"mask", base64_encode(image_io::encode_pbm(wrong))}}.dump()};
  });
  ProviderClient bad(config(ProviderKind::Segment, tmp / "b"), violating, support::no_sleep());
  const auto routed = segment(image, fg, bg, bad);
  CHECK(routed.source == SegmentSource::Fallback);
  CHECK_FALSE(routed.mask.at(25, 8));
  ProviderClient dead(config(ProviderKind::Segment, tmp / "c"), support::dead_network(), support::no_sleep());
  CHECK(segment(image, fg, bg, dead).source == SegmentSource::Fallback);

  // Blank page: both routes fail.
  const GrayImage blank = GrayImage::Constant(20, 20, 255);
  try {
    segment(blank, {{3, 3}}, {}, offline);
    FAIL("expected SegmentationFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SegmentationFailed);
    CHECK(e.cause() == ErrorCode::PointOnOppositeClass);
  }
}
