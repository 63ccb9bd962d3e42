#include <doctest.h>

#include <chrono>
#include <fstream>
#include <random>
#include <thread>

#include "cutstudio/retrieval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cutstudio;
using namespace cutstudio::retrieval;

namespace {

Eigen::VectorXd random_unit(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = g(rng);
  return v / v.norm();
}

std::string id_of(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "w%03d", i);
  return buf;
}

RetrievalIndex index_of(const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries) {
  std::map<std::string, Eigen::VectorXd> table;
  std::vector<IndexItem> items;
  for (const auto& [id, v] : entries) {
    table[id] = v;
    items.push_back({id, id, {}});
  }
  TableEmbedder e(static_cast<std::size_t>(entries.front().second.size()), table);
  // The table is keyed by text, so look items up by their image ref (= id).
  struct ById final : Embedder {
    TableEmbedder& inner;
    explicit ById(TableEmbedder& t) : inner(t) {}
    std::size_t dim() const override { return inner.dim(); }
    Eigen::VectorXd embed(const EmbedItem& item) override { return inner.embed(EmbedItem::from_text(item.image_ref)); }
  } by_id(e);
  return build_index(items, by_id);
}

void check_against_oracle(const RetrievalIndex& index, const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries,
                          const Eigen::VectorXd& q, std::size_t k) {
  const auto got = search(index, q, k);
  const auto want = oracle::brute_force_rank(entries, q, k);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].work_id == want[i].first);
    CHECK(got[i].rank == i + 1);
    CHECK(std::abs(got[i].score - want[i].second) <= 1e-12);
  }
}

}  // namespace

TEST_CASE("normalize") {
  Eigen::Vector2d v(3, 4);
  const Eigen::Vector2d n = normalize(v);
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-15));
  const Eigen::Vector2d unit(1, 0);
  CHECK(normalize(unit) == unit);
  CHECK(support::code_of([] { normalize(Eigen::Vector2d(0, 0)); }) == ErrorCode::ZeroVector);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x = random_unit(rng, 64) * (1 + i);
    CHECK(std::abs(normalize(x).norm() - 1.0) <= 1e-6);
  }
}

TEST_CASE("search equals the brute-force oracle on random vectors") {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(200);
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  for (int i = 0; i < 200; ++i) entries.emplace_back(id_of(i), random_unit(rng, 64));
  const auto index = index_of(entries);
  REQUIRE(index.size() == 200);
  for (int q = 0; q < 50; ++q) {
    const Eigen::VectorXd query = random_unit(rng, 64);
    for (std::size_t k : {1u, 5u, 20u}) check_against_oracle(index, entries, query, k);
  }
  // Stored vectors as queries, and a duplicate-heavy set to force ties.
  for (int i = 0; i < 200; i += 17) check_against_oracle(index, entries, entries[static_cast<std::size_t>(i)].second, 20);
  std::vector<std::pair<std::string, Eigen::VectorXd>> tied;
  for (int i = 0; i < 60; ++i) tied.emplace_back(id_of(59 - i), entries[static_cast<std::size_t>(i % 4)].second);
  const auto tied_index = index_of(tied);
  for (int q = 0; q < 4; ++q)
    for (std::size_t k : {1u, 5u, 20u, 60u}) check_against_oracle(tied_index, tied, entries[static_cast<std::size_t>(q)].second, k);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
}

TEST_CASE("search properties") {
  std::mt19937_64 rng(5);
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  for (int i = 0; i < 40; ++i) entries.emplace_back(id_of(i), random_unit(rng, 16));
  const auto index = index_of(entries);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd q = random_unit(rng, 16);
    for (std::size_t k = 1; k < 40; ++k) {
      const auto a = search(index, q, k);
      const auto b = search(index, q, k + 1);
      CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
    const auto all = search(index, q, 100);
    CHECK(all.size() == 40);
    for (std::size_t i = 1; i < all.size(); ++i) {
      CHECK(all[i - 1].score >= all[i].score);
      if (all[i - 1].score == all[i].score) CHECK(all[i - 1].work_id < all[i].work_id);
    }
  }
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd a = random_unit(rng, 16), b = random_unit(rng, 16);
    CHECK(std::abs(cosine(a, b) - cosine(b, a)) <= 1e-9);
  }

  // Exact stored vector -> rank 1, score 1.
  const auto self = search(index, entries[7].second, 3);
  CHECK(self[0].work_id == entries[7].first);
  CHECK(std::abs(self[0].score - 1.0) <= 1e-12);

  // Orthogonal query -> all zero, id order.
  std::vector<std::pair<std::string, Eigen::VectorXd>> axis;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(6);
    v[i] = 1;
    axis.emplace_back(id_of(4 - i), v);
  }
  Eigen::VectorXd q = Eigen::VectorXd::Zero(6);
  q[5] = 1;
  const auto zero = search(index_of(axis), q, 5);
  for (std::size_t i = 0; i < zero.size(); ++i) {
    CHECK(zero[i].score == 0.0);
    CHECK(zero[i].work_id == id_of(static_cast<int>(i)));
  }

  CHECK(support::code_of([&] { search(index, Eigen::VectorXd::Ones(3), 5); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("build_index contracts") {
  MockEmbedder mock(32);
  CHECK(build_index({}, mock).size() == 0);
  const std::vector<IndexItem> three = {{"a", "a.png", {{"caption", "red magpie"}}},
                                        {"b", "b.png", {{"caption", "white peony"}}},
                                        {"c", "c.png", {{"caption", "green fish"}}}};
  const auto idx = build_index(three, mock);
  CHECK(idx.size() == 3);
  CHECK(idx.dim() == 32);
  for (Eigen::Index r = 0; r < idx.vectors().rows(); ++r) CHECK(std::abs(idx.vectors().row(r).norm() - 1) <= 1e-12);
  CHECK(build_index(three, mock).build_stamp() == idx.build_stamp());

  struct FailsOn final : Embedder {
    std::string bad;
    std::size_t dim() const override { return 4; }
    Eigen::VectorXd embed(const EmbedItem& item) override {
      if (item.image_ref == bad) throw std::runtime_error("model crashed");
      return Eigen::VectorXd::Ones(4);
    }
  } failing;
  failing.bad = "b.png";
  try {
    build_index(three, failing);
    FAIL("expected EmbedderFault");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmbedderFault);
    CHECK(std::string(e.what()).find("b") != std::string::npos);
  }

  struct WrongDim final : Embedder {
    std::size_t dim() const override { return 4; }
    Eigen::VectorXd embed(const EmbedItem&) override { return Eigen::VectorXd::Ones(5); }
  } wrong;
  CHECK(support::code_of([&] { build_index(three, wrong); }) == ErrorCode::DimensionMismatch);

  auto dup = three;
  dup[2].id = "a";
  CHECK(support::code_of([&] { build_index(dup, mock); }) == ErrorCode::DuplicateId);
}

TEST_CASE("recall harness") {
  std::mt19937_64 rng(9);
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  for (int i = 0; i < 10; ++i) entries.emplace_back(id_of(i), random_unit(rng, 64));
  const auto index = index_of(entries);

  std::vector<QueryPair> pairs;
  std::map<std::string, Eigen::VectorXd> identity;
  for (const auto& [id, v] : entries) {
    pairs.push_back({"query for " + id, id});
    identity["query for " + id] = v;
  }
  TableEmbedder id_mock(64, identity);
  const auto report = evaluate_recall(index, pairs, id_mock);
  CHECK(report.n_queries == 10);
  CHECK(report.recall_at.at(1) == 1.0);
  CHECK(report.recall_at.at(5) == 1.0);
  CHECK(report.recall_at.at(10) == 1.0);

  // Every query collapses to one vector orthogonal to nothing in particular:
  // all items tie, so only the query whose answer sorts first hits at k = 1.
  std::vector<std::pair<std::string, Eigen::VectorXd>> axis;
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(11);
    v[i] = 1;
    axis.emplace_back(id_of(i), v);
  }
  const auto axis_index = index_of(axis);
  std::vector<QueryPair> axis_pairs;
  for (const auto& [id, v] : axis) axis_pairs.push_back({"q " + id, id});
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(11);
  fixed[10] = 1;
  FixedEmbedder adversary(fixed);
  const auto adv = evaluate_recall(axis_index, axis_pairs, adversary);
  CHECK(adv.recall_at.at(1) == 0.1);
  CHECK(adv.recall_at.at(5) == 0.5);
  CHECK(adv.recall_at.at(10) == 1.0);

  MockEmbedder mock(64);
  for (int t = 0; t < 10; ++t) {
    const auto r = evaluate_recall(index, pairs, mock, {1, 2, 3, 5, 8, 10});
    double prev = 0;
    for (auto k : r.ks) {
      CHECK(r.recall_at.at(k) >= prev);
      prev = r.recall_at.at(k);
    }
  }

  CHECK(support::code_of([&] { evaluate_recall(index, {}, id_mock); }) == ErrorCode::EmptyEvaluation);
  CHECK(support::code_of([&] { evaluate_recall(index, {{"q", "nope"}}, id_mock); }) == ErrorCode::UnknownGroundTruth);
}

TEST_CASE("index persistence is bit-exact") {
  std::mt19937_64 rng(77);
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  for (int i = 0; i < 30; ++i) entries.emplace_back(id_of(i), random_unit(rng, 24) * 3.0);
  const auto index = index_of(entries);
  support::TempDir dir;
  save_index(index, dir / "a.idx");
  const auto back = load_index(dir / "a.idx");
  CHECK(back.ids() == index.ids());
  CHECK(back.vectors() == index.vectors());
  CHECK(back.build_stamp() == index.build_stamp());
  save_index(back, dir / "b.idx");
  std::ifstream a(dir / "a.idx"), b(dir / "b.idx");
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));

  std::ofstream(dir / "bad.idx") << "not an index\n";
  CHECK(support::code_of([&] { load_index(dir / "bad.idx"); }) == ErrorCode::SchemaError);
}

TEST_CASE("concurrent searches agree with serial ones") {
  std::mt19937_64 rng(8);
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  for (int i = 0; i < 100; ++i) entries.emplace_back(id_of(i), random_unit(rng, 32));
  const auto index = index_of(entries);
  std::vector<Eigen::VectorXd> queries;
  for (int i = 0; i < 64; ++i) queries.push_back(random_unit(rng, 32));
  std::vector<std::vector<RankedResult>> serial, parallel(queries.size());
  for (const auto& q : queries) serial.push_back(search(index, q, 20));
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      for (std::size_t i = static_cast<std::size_t>(t); i < queries.size(); i += 8) parallel[i] = search(index, queries[i], 20);
    });
  for (auto& th : threads) th.join();
  CHECK(serial == parallel);
}
