#include <doctest.h>

#include <csignal>
#include <cstdio>
#include <sys/wait.h>
#include <unistd.h>

#include "corpus.hpp"
#include "cutstudio/gateway.hpp"
#include "support.hpp"

// After the Eigen-based headers: <resolv.h> defines a `_res` macro.
#include <httplib.h>

using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Run cli(const support::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(CUTSTUDIO_CLI) + " --data " + corpus::reference_dir().string() + " --cache " +
                          (dir / "cache").string() + " --offline " + args + " >" + out.string() + " 2>" +
                          err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

}  // namespace

TEST_CASE("ingest summarizes the corpus") {
  support::TempDir dir;
  const auto r = cli(dir, "ingest");
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["factors"] == 4);
  CHECK(j["factor_types"] == 18);
  CHECK(j["unit_patterns"] == 25);
  CHECK(j["composite_patterns"] == 42);
  CHECK(j["works"] == 20);
  CHECK(j["violations"] == 0);
}

TEST_CASE("index build is deterministic") {
  support::TempDir dir;
  const auto a = cli(dir, "index build --out " + (dir / "a.idx").string());
  const auto b = cli(dir, "index build --out " + (dir / "b.idx").string());
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  const auto ja = json::parse(a.out), jb = json::parse(b.out);
  CHECK(ja["size"] == 20);
  CHECK(ja["sha256"] == jb["sha256"]);
  CHECK(slurp(dir / "a.idx") == slurp(dir / "b.idx"));
  CHECK(cutstudio::gateway::sha256_hex(slurp(dir / "a.idx")) == ja["sha256"]);
}

TEST_CASE("search and eval-recall") {
  support::TempDir dir;
  REQUIRE(cli(dir, "index build --out " + (dir / "i.idx").string()).code == 0);
  const auto s = cli(dir, "search --index " + (dir / "i.idx").string() + " -k 3 \"peony in full bloom\"");
  REQUIRE(s.code == 0);
  CHECK(json::parse(s.out)["results"].size() == 3);

  const auto r = cli(dir, "eval-recall --index " + (dir / "i.idx").string() + " --embedder identity");
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["n_queries"] == 20);
  for (const auto* k : {"recall@1", "recall@5", "recall@10"}) CHECK(j["recall"][k] == 1.0);
}

TEST_CASE("extract-patterns writes masks and a byte-stable manifest") {
  support::TempDir dir;
  const auto a = cli(dir, "extract-patterns --out " + (dir / "a").string());
  const auto b = cli(dir, "extract-patterns --out " + (dir / "b").string());
  REQUIRE(a.code == 0);
  CHECK(json::parse(a.out)["sha256"] == json::parse(b.out)["sha256"]);
  CHECK(slurp(dir / "a/manifest.json") == slurp(dir / "b/manifest.json"));
  const auto manifest = corpus::read_json(dir / "a/manifest.json");
  REQUIRE(manifest["works"].size() == 20);
  for (const auto& w : manifest["works"])
    for (const auto& c : w["cutouts"]) {
      const auto mask = dir / "a" / c["mask_ref"].get<std::string>();
      REQUIRE(std::filesystem::exists(mask));
      CHECK(slurp(mask).rfind("P4", 0) == 0);
      CHECK(slurp(mask) == slurp(dir / "b" / c["mask_ref"].get<std::string>()));
    }
}

TEST_CASE("failures exit nonzero with a JSON error") {
  support::TempDir dir;
  const auto r = cli(dir, "search --index " + (dir / "missing.idx").string() + " magpie");
  CHECK(r.code != 0);
  CHECK(json::parse(r.err)["error"]["code"] == "IoError");
  const auto usage = cli(dir, "frobnicate");
  CHECK(usage.code != 0);
  CHECK(json::parse(usage.err)["error"]["code"] == "UsageError");
  std::ofstream(dir / "broken.json") << "{}";
  const auto e = cli(dir, "export " + (dir / "broken.json").string());
  CHECK(e.code != 0);
  CHECK(json::parse(e.err)["error"].contains("code"));
}

TEST_CASE("serve answers health, export renders a saved session") {
  support::TempDir dir;
  int pipefd[2];
  REQUIRE(pipe(pipefd) == 0);
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    dup2(pipefd[1], STDOUT_FILENO);
    close(pipefd[0]);
    const std::string data = corpus::reference_dir().string(), cache = (dir / "cache").string(),
                      sessions = (dir / "sessions").string();
    execl(CUTSTUDIO_CLI, CUTSTUDIO_CLI, "--data", data.c_str(), "--cache", cache.c_str(), "--offline", "serve",
          "--listen", "127.0.0.1:0", "--sessions", sessions.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(pipefd[1]);
  std::string line;
  char ch;
  while (read(pipefd[0], &ch, 1) == 1 && ch != '\n') line.push_back(ch);
  close(pipefd[0]);
  REQUIRE_FALSE(line.empty());
  const std::string addr = json::parse(line)["listening"];
  const int port = std::stoi(addr.substr(addr.rfind(':') + 1));

  httplib::Client c("127.0.0.1", port);
  auto health = c.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);

  const std::string id = json::parse(c.Post("/session", "{}", "application/json")->body)["session_id"];
  const json sq = {{"element",
                    {{"type", "element"},
                     {"kind", "contour"},
                     {"fill", "foreground"},
                     {"transform", {1, 0, 0, 1, 0, 0}},
                     {"path", {{{0, 0}, {40, 0}, {40, 40}, {0, 40}, {0, 0}}}},
                     {"provenance", {{"source", "extracted"}, {"work_id", ""}, {"cutout_id", ""}}},
                     {"holes", json::array()}}}};
  auto add = c.Post("/session/" + id + "/board/add", sq.dump(), "application/json");
  REQUIRE(add);
  CHECK(add->status == 200);
  const std::string svg = c.Get("/session/" + id + "/export.svg")->body;

  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);

  const auto r = cli(dir, "export " + (dir / "sessions" / (id + ".json")).string());
  CHECK(r.code == 0);
  CHECK(r.out == svg);
}
