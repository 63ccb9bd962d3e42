#include "cutstudio/retrieval.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cutstudio/text.hpp"

namespace cutstudio::retrieval {

namespace {

constexpr std::string_view kIndexMagic = "cutstudio-index";
constexpr int kIndexVersion = 1;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

Eigen::VectorXd MockEmbedder::token_vector(std::string_view token) const {
  std::uint64_t state = fnv1a(token, fnv1a(std::to_string(seed_)));
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
  // Uniform in [-1, 1) from the top 53 bits: exact arithmetic on every platform.
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
  return v;
}

Eigen::VectorXd MockEmbedder::embed(const EmbedItem& item) {
  std::string source = item.text;
  if (item.kind == EmbedItem::Kind::Image && text::trim(source).empty())
    source = std::filesystem::path(item.image_ref).stem().string();
  auto tokens = text::tokenize(source);
  if (tokens.empty()) tokens.emplace_back();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (const auto& t : tokens) acc += token_vector(t);
  return normalize(acc);
}

Eigen::VectorXd TableEmbedder::embed(const EmbedItem& item) {
  auto it = table_.find(item.text);
  if (it != table_.end()) return it->second;
  if (!fallback_) fail(ErrorCode::EmbedderFault, "no table entry for '" + item.text + "'");
  return fallback_->embed(item);
}

RetrievalIndex build_index(const std::vector<IndexItem>& items, Embedder& embedder) {
  const std::size_t dim = embedder.dim();
  RetrievalIndex::Matrix rows(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(dim));
  std::vector<std::string> ids;
  std::vector<Metadata> metadata;
  ids.reserve(items.size());
  metadata.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    auto caption = item.metadata.find("caption");
    Eigen::VectorXd v;
    try {
      v = embedder.embed(EmbedItem::from_image(item.image_ref,
                                               caption == item.metadata.end() ? std::string{} : caption->second));
    } catch (const std::exception& e) {
      fail(ErrorCode::EmbedderFault, "EmbedderFault(" + item.id + "): " + e.what());
    }
    if (static_cast<std::size_t>(v.size()) != dim)
      fail(ErrorCode::DimensionMismatch, "item '" + item.id + "' embedded to dimension " +
                                             std::to_string(v.size()) + ", expected " + std::to_string(dim));
    rows.row(static_cast<Eigen::Index>(i)) = v.transpose();
    ids.push_back(item.id);
    metadata.push_back(item.metadata);
  }
  if (items.empty()) return RetrievalIndex(dim);
  return RetrievalIndex(dim, std::move(ids), rows, std::move(metadata));
}

RecallReport evaluate_recall(const RetrievalIndex& index, const std::vector<QueryPair>& pairs,
                             Embedder& embedder, std::vector<std::size_t> ks) {
  if (pairs.empty()) fail(ErrorCode::EmptyEvaluation, "no query pairs to evaluate");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.empty() || ks.front() == 0) fail(ErrorCode::InvalidArgument, "ks must be positive");
  for (const auto& p : pairs)
    if (index.find(p.gt_id) < 0) fail(ErrorCode::UnknownGroundTruth, "ground truth '" + p.gt_id + "' not in index");

  std::map<std::size_t, std::size_t> hits;
  for (const auto& p : pairs) {
    const auto results = index.search(embedder.embed(EmbedItem::from_text(p.query_text)), ks.back());
    std::size_t rank = 0;
    for (const auto& r : results)
      if (r.work_id == p.gt_id) rank = r.rank;
    for (auto k : ks)
      if (rank != 0 && rank <= k) ++hits[k];
  }

  RecallReport report;
  report.ks = ks;
  report.n_queries = pairs.size();
  for (auto k : ks) report.recall_at[k] = static_cast<double>(hits[k]) / static_cast<double>(pairs.size());
  return report;
}

void save_index(const RetrievalIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << kIndexMagic << ' ' << kIndexVersion << '\n'
      << "dim " << index.dim() << '\n'
      << "count " << index.size() << '\n'
      << "stamp " << index.build_stamp() << '\n';
  for (std::size_t r = 0; r < index.size(); ++r) {
    out << nlohmann::json(index.ids()[r]).dump() << '\t' << nlohmann::json(index.metadata(r)).dump();
    const auto row = index.vectors().row(static_cast<Eigen::Index>(r));
    for (Eigen::Index c = 0; c < row.size(); ++c) out << (c ? ' ' : '\t') << format_double(row[c]);
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

RetrievalIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  auto corrupt = [&](const std::string& what) -> void {
    fail(ErrorCode::SchemaError, path.filename().string() + ": " + what);
  };

  std::string magic, key, stamp;
  int version = 0;
  std::size_t dim = 0, count = 0;
  if (!(in >> magic >> version) || magic != kIndexMagic) corrupt("not an index file");
  if (version != kIndexVersion) corrupt("unsupported index version");
  if (!(in >> key >> dim) || key != "dim") corrupt("missing dim");
  if (!(in >> key >> count) || key != "count") corrupt("missing count");
  if (!(in >> key >> stamp) || key != "stamp") corrupt("missing stamp");
  in.ignore(1);

  std::vector<std::string> ids;
  std::vector<Metadata> metadata;
  RetrievalIndex::Matrix rows(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  std::string line;
  for (std::size_t r = 0; r < count; ++r) {
    if (!std::getline(in, line)) corrupt("truncated entries");
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) corrupt("malformed entry line");
    try {
      ids.push_back(nlohmann::json::parse(line.substr(0, t1)).get<std::string>());
      metadata.push_back(nlohmann::json::parse(line.substr(t1 + 1, t2 - t1 - 1)).get<Metadata>());
    } catch (const nlohmann::json::exception& e) {
      corrupt(e.what());
    }
    const char* p = line.data() + t2 + 1;
    const char* end = line.data() + line.size();
    for (std::size_t c = 0; c < dim; ++c) {
      while (p < end && *p == ' ') ++p;
      double v = 0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) corrupt("bad vector value");
      rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      p = res.ptr;
    }
  }
  RetrievalIndex index = count == 0 ? RetrievalIndex(dim)
                                    : RetrievalIndex(dim, std::move(ids), rows, std::move(metadata), true);
  if (index.build_stamp() != stamp) corrupt("stamp mismatch");
  return index;
}

}  // namespace cutstudio::retrieval
