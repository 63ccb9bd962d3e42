// Command-line front end: corpus ingestion, pattern extraction, index
// maintenance, recall evaluation, the HTTP service and session export.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cutstudio/studio_http.hpp"

#include <CLI11.hpp>

using namespace cutstudio;
using nlohmann::json;

namespace {

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
    fail(ErrorCode::IoError, "cannot write " + p.string());
}

struct Options {
  std::string data_dir;
  std::string cache_dir;
  bool offline = false;
};

studio::ServiceConfig config_from(const Options& o) {
  auto cfg = studio::ServiceConfig::from_env();
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  if (o.offline) cfg.offline = true;
  return cfg;
}

std::unique_ptr<gateway::ProviderClient> embed_client(const studio::ServiceConfig& cfg) {
  auto p = cfg.embed;
  p.cache_dir = cfg.cache_dir;
  p.offline = p.offline || cfg.offline;
  return std::make_unique<gateway::ProviderClient>(p, std::make_shared<gateway::HttpTransport>());
}

retrieval::RetrievalIndex index_for(const studio::ServiceConfig& cfg, const std::string& index_path,
                                    gateway::ProviderClient& client) {
  if (!index_path.empty()) return retrieval::load_index(index_path);
  const auto kb = kb::load_corpus(cfg.data_dir);
  gateway::GatewayEmbedder embedder(client);
  return retrieval::build_index(studio::index_items(kb, cfg.data_dir), embedder);
}

json ingest(const studio::ServiceConfig& cfg) {
  const auto kb = kb::load_corpus(cfg.data_dir);
  json regions = json::object();
  for (const auto& [r, n] : kb::region_distribution(kb)) regions[std::string(kb::region_name(r))] = n;
  json lexicon = json::object();
  for (auto s : kb::kPatternSubcategories) lexicon[std::string(kb::subcategory_name(s))] = kb.patterns().count(s);
  std::size_t violations = 0;
  for (const auto& w : kb.works()) violations += kb::validate_annotation(w, kb.factors()).size();
  return {{"data_dir", cfg.data_dir.string()},
          {"factors", kb.factors().factors.size()},
          {"factor_types", kb.factors().type_count()},
          {"lexicon", lexicon},
          {"unit_patterns", kb.patterns().count(kb::PatternCategory::Unit)},
          {"composite_patterns", kb.patterns().count(kb::PatternCategory::Composite)},
          {"works", kb.works().size()},
          {"pattern_annotations", kb.pattern_annotations().size()},
          {"templates", kb.templates().size()},
          {"regions", regions},
          {"violations", violations}};
}

bool is_image(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".pgm" || ext == ".pbm" || ext == ".png";
}

json extract_patterns(const studio::ServiceConfig& cfg, const std::string& images_dir,
                      const std::filesystem::path& out_dir, const std::vector<std::string>& only) {
  const auto kb = kb::load_corpus(cfg.data_dir);
  const auto exemplars = studio::pattern_exemplars(kb, cfg.data_dir);

  std::vector<studio::WorkPatterns> results;
  if (images_dir.empty()) {
    for (const auto& w : kb.works())
      if (only.empty() || std::count(only.begin(), only.end(), w.work_id))
        results.push_back(studio::extract_work_patterns(kb, cfg.data_dir, w.work_id, exemplars));
  } else {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(images_dir))
      if (e.is_regular_file() && is_image(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string id = f.stem().string();
      if (!only.empty() && !std::count(only.begin(), only.end(), id)) continue;
      if (kb.find_work(id) && std::filesystem::equivalent(f, cfg.data_dir / kb.find_work(id)->image_ref))
        results.push_back(studio::extract_work_patterns(kb, cfg.data_dir, id, exemplars));
      else
        results.push_back(studio::extract_image_patterns(image_io::read_gray(f), id, exemplars));
    }
  }

  json works = json::array();
  std::size_t total = 0;
  for (const auto& wp : results) {
    const std::string mask_dir = "masks/" + wp.work_id;
    for (const auto& r : wp.cutouts)
      write_file(out_dir / mask_dir / (r.cutout.cutout_id + ".pbm"), image_io::encode_pbm(r.cutout.mask()));
    total += wp.cutouts.size();
    works.push_back(studio::manifest_json(wp, mask_dir));
  }
  json manifest = {{"schema", "cutstudio.patterns"}, {"version", 1}, {"works", std::move(works)}};
  const std::string bytes = manifest.dump(1) + "\n";
  write_file(out_dir / "manifest.json", bytes);
  return {{"manifest", (out_dir / "manifest.json").string()},
          {"works", results.size()},
          {"cutouts", total},
          {"sha256", gateway::sha256_hex(bytes)}};
}

json search(const retrieval::RetrievalIndex& index, gateway::ProviderClient& client, const std::string& query,
            std::size_t k) {
  const auto hits = retrieval::search(index, gateway::embed(retrieval::EmbedItem::from_text(query), client), k);
  json list = json::array();
  for (const auto& h : hits) {
    json j = {{"rank", h.rank}, {"work_id", h.work_id}, {"score", h.score}};
    const auto row = index.find(h.work_id);
    if (row >= 0)
      if (auto t = index.metadata(static_cast<std::size_t>(row)).find("title");
          t != index.metadata(static_cast<std::size_t>(row)).end())
        j["title"] = t->second;
    list.push_back(std::move(j));
  }
  return {{"query", query}, {"k", k}, {"results", std::move(list)}};
}

json eval_recall(const retrieval::RetrievalIndex& index, gateway::ProviderClient& client,
                 const std::filesystem::path& queries, const std::string& embedder_name,
                 const std::vector<std::size_t>& ks) {
  const auto pairs = studio::load_queries(queries);
  retrieval::RecallReport report;
  if (embedder_name == "gateway") {
    gateway::GatewayEmbedder e(client);
    report = retrieval::evaluate_recall(index, pairs, e, ks);
  } else if (embedder_name == "identity") {
    std::map<std::string, Eigen::VectorXd> table;
    for (const auto& p : pairs)
      if (index.find(p.gt_id) >= 0) table.emplace(p.query_text, index.vector(p.gt_id));
    retrieval::TableEmbedder e(index.dim(), std::move(table));
    report = retrieval::evaluate_recall(index, pairs, e, ks);
  } else {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index.dim()));
    if (v.size() > 0) v(0) = 1;
    retrieval::FixedEmbedder e(v);
    report = retrieval::evaluate_recall(index, pairs, e, ks);
  }
  json recall = json::object();
  for (const auto& [k, r] : report.recall_at) recall["recall@" + std::to_string(k)] = r;
  return {{"embedder", embedder_name},
          {"n_queries", report.n_queries},
          {"ks", report.ks},
          {"recall", recall},
          {"index_stamp", index.build_stamp()}};
}

int serve(studio::ServiceConfig cfg, const std::string& listen) {
  if (!listen.empty()) cfg.listen = studio::parse_listen(listen);
  auto studio = studio::Studio::open(cfg, std::make_shared<gateway::HttpTransport>());
  httplib::Server server;
  studio::install_routes(server, *studio);
  int port = cfg.listen.port;
  if (port == 0) {
    port = server.bind_to_any_port(cfg.listen.host);
  } else if (!server.bind_to_port(cfg.listen.host, port)) {
    port = -1;
  }
  if (port < 0) fail(ErrorCode::IoError, "cannot listen on " + cfg.listen.host + ":" + std::to_string(cfg.listen.port));
  std::cout << json{{"listening", cfg.listen.host + ":" + std::to_string(port)}}.dump() << std::endl;
  return server.listen_after_bind() ? 0 : 1;
}

std::string export_session(const std::filesystem::path& session, double scale) {
  const auto history = moodboard::load_session(session);
  moodboard::ExportOptions opts;
  opts.scale = scale;
  return moodboard::export_svg(history.current(), opts);
}

int report_error(const std::string& code, const std::string& message, const std::optional<std::string>& cause = {}) {
  json err = {{"code", code}, {"message", message}};
  if (cause) err["cause"] = *cause;
  std::cerr << json{{"error", err}}.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cutstudio: paper-cut design studio tools"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--data", opt.data_dir, "corpus directory (default $HC_DATA_DIR or data/reference)");
  app.add_option("--cache", opt.cache_dir, "provider cache directory (default $HC_CACHE_DIR)");
  app.add_flag("--offline", opt.offline, "never contact providers");

  auto* ingest_cmd = app.add_subcommand("ingest", "validate the corpus and print a summary");

  std::string images_dir, out_dir = "patterns";
  std::vector<std::string> works;
  auto* extract_cmd = app.add_subcommand("extract-patterns", "cut-out masks and a pattern manifest per work");
  extract_cmd->add_option("--images", images_dir, "image directory (default: the corpus images)");
  extract_cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
  extract_cmd->add_option("--work", works, "restrict to these work ids");

  std::string index_out = "index.cutidx";
  auto* index_cmd = app.add_subcommand("index", "retrieval index maintenance");
  index_cmd->require_subcommand(1);
  auto* build_cmd = index_cmd->add_subcommand("build", "embed the corpus and write the index");
  build_cmd->add_option("--out", index_out, "index file")->capture_default_str();

  std::string index_path, query;
  std::size_t k = retrieval::kDefaultTopK;
  auto* search_cmd = app.add_subcommand("search", "top-k works for a text query");
  search_cmd->add_option("--index", index_path, "index file (default: build in memory)");
  search_cmd->add_option("query", query, "query text")->required();
  search_cmd->add_option("-k", k, "result count")->capture_default_str()->check(CLI::PositiveNumber);

  std::string queries_path, embedder_name = "gateway";
  std::vector<std::size_t> ks = {1, 5, 10};
  auto* recall_cmd = app.add_subcommand("eval-recall", "recall@k over query/ground-truth pairs");
  recall_cmd->add_option("--index", index_path, "index file (default: build in memory)");
  recall_cmd->add_option("--queries", queries_path, "queries.jsonl (default: <data>/queries.jsonl)");
  recall_cmd->add_option("--embedder", embedder_name, "gateway | identity | fixed")
      ->capture_default_str()
      ->check(CLI::IsMember({"gateway", "identity", "fixed"}));
  recall_cmd->add_option("--ks", ks, "cut-offs")->delimiter(',')->capture_default_str();

  std::string listen, session_dir;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
  serve_cmd->add_option("--listen", listen, "host:port (default $HC_LISTEN or 127.0.0.1:8080)");
  serve_cmd->add_option("--index", index_path, "prebuilt index file");
  serve_cmd->add_option("--sessions", session_dir, "session directory");

  std::string session_path, svg_out;
  double scale = 1.0;
  auto* export_cmd = app.add_subcommand("export", "session file to SVG");
  export_cmd->add_option("session", session_path, "session JSON file")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", svg_out, "output file (default stdout)");
  export_cmd->add_option("--scale", scale, "mm per canvas unit")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("UsageError", e.what());
    return 2;
  }

  try {
    auto cfg = config_from(opt);
    if (*ingest_cmd) {
      print(ingest(cfg));
    } else if (*extract_cmd) {
      print(extract_patterns(cfg, images_dir, out_dir, works));
    } else if (*build_cmd) {
      auto client = embed_client(cfg);
      const auto index = index_for(cfg, {}, *client);
      retrieval::save_index(index, index_out);
      print({{"index", index_out},
             {"size", index.size()},
             {"dim", index.dim()},
             {"stamp", index.build_stamp()},
             {"sha256", gateway::sha256_hex(read_file(index_out))}});
    } else if (*search_cmd) {
      auto client = embed_client(cfg);
      print(search(index_for(cfg, index_path, *client), *client, query, k));
    } else if (*recall_cmd) {
      auto client = embed_client(cfg);
      if (queries_path.empty()) queries_path = (cfg.data_dir / "queries.jsonl").string();
      print(eval_recall(index_for(cfg, index_path, *client), *client, queries_path, embedder_name, ks));
    } else if (*serve_cmd) {
      if (!index_path.empty()) cfg.index_path = index_path;
      if (!session_dir.empty()) cfg.session_dir = session_dir;
      return serve(cfg, listen);
    } else if (*export_cmd) {
      const std::string svg = export_session(session_path, scale);
      if (svg_out.empty())
        std::cout << svg;
      else
        write_file(svg_out, svg);
    }
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.code())), e.what(),
                        e.cause() ? std::optional<std::string>(std::string(to_string(*e.cause()))) : std::nullopt);
  } catch (const std::exception& e) {
    return report_error("Internal", e.what());
  }
  return 0;
}
