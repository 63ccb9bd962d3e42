#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutstudio/error.hpp"

namespace cutstudio::retrieval {

template <typename Scalar>
using EmbeddingVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Unit-norm copy of `v`. Throws ZeroVector for a zero or non-finite input.
template <typename Derived>
auto normalize(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  EmbeddingVector<Scalar> out = v;
  if (!out.allFinite()) fail(ErrorCode::ZeroVector, "embedding has non-finite entries");
  const Scalar n = out.norm();
  if (!(n > Scalar(0))) fail(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  out /= n;
  return out;
}

/// Cosine similarity of two vectors of equal length.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar denom = a.norm() * b.norm();
  if (!(denom > Scalar(0))) fail(ErrorCode::ZeroVector, "cosine of a zero vector");
  return std::clamp(a.dot(b) / denom, Scalar(-1), Scalar(1));
}

struct RankedResult {
  std::string work_id;
  double score = 0.0;
  std::size_t rank = 0;  ///< 1-based

  bool operator==(const RankedResult&) const = default;
};

using Metadata = std::map<std::string, std::string>;

/// What gets embedded: either free text or an image with an optional caption.
struct EmbedItem {
  enum class Kind { Text, Image };
  Kind kind = Kind::Text;
  std::string text;        ///< query text, or the caption for images
  std::string image_ref;   ///< path for images

  static EmbedItem from_text(std::string t) { return {Kind::Text, std::move(t), {}}; }
  static EmbedItem from_image(std::string ref, std::string caption = {}) {
    return {Kind::Image, std::move(caption), std::move(ref)};
  }
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual Eigen::VectorXd embed(const EmbedItem& item) = 0;
};

/// Seeded hash of lowercased tokens -> pseudo-random unit vector. Images embed
/// their caption when present, otherwise their file stem.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim = 64, std::uint64_t seed = 0x5eed) : dim_(dim), seed_(seed) {}
  std::size_t dim() const override { return dim_; }
  Eigen::VectorXd embed(const EmbedItem& item) override;

  /// The per-token direction (not normalized). Exposed for tests.
  Eigen::VectorXd token_vector(std::string_view token) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Maps known query texts to fixed vectors; anything else delegates.
class TableEmbedder final : public Embedder {
 public:
  TableEmbedder(std::size_t dim, std::map<std::string, Eigen::VectorXd> table, Embedder* fallback = nullptr)
      : dim_(dim), table_(std::move(table)), fallback_(fallback) {}
  std::size_t dim() const override { return dim_; }
  Eigen::VectorXd embed(const EmbedItem& item) override;

 private:
  std::size_t dim_;
  std::map<std::string, Eigen::VectorXd> table_;
  Embedder* fallback_;
};

/// Returns the same vector for every input.
class FixedEmbedder final : public Embedder {
 public:
  explicit FixedEmbedder(Eigen::VectorXd v) : v_(std::move(v)) {}
  std::size_t dim() const override { return static_cast<std::size_t>(v_.size()); }
  Eigen::VectorXd embed(const EmbedItem&) override { return v_; }

 private:
  Eigen::VectorXd v_;
};

struct IndexItem {
  std::string id;
  std::string image_ref;
  Metadata metadata;
};

/// Exact cosine index over unit-norm vectors, immutable after construction.
/// Rows of `vectors()` are stored in ascending id order so that the tie rule
/// (equal scores -> ascending id) falls out of a stable ordering.
template <typename Scalar>
class BasicRetrievalIndex {
 public:
  using Vector = EmbeddingVector<Scalar>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BasicRetrievalIndex() = default;
  explicit BasicRetrievalIndex(std::size_t dim) : dim_(dim), vectors_(0, static_cast<Eigen::Index>(dim)) {
    compute_stamp();
  }

  /// Entries are normalized unless `rows_are_unit` (persisted indexes reload
  /// bit-exact); ids must be unique.
  BasicRetrievalIndex(std::size_t dim, std::vector<std::string> ids, const Matrix& rows,
                      std::vector<Metadata> metadata, bool rows_are_unit = false);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix& vectors() const { return vectors_; }
  const Metadata& metadata(std::size_t row) const { return metadata_[row]; }
  const std::string& build_stamp() const { return build_stamp_; }

  /// Row of `id`, or -1.
  Eigen::Index find(std::string_view id) const;
  Vector vector(std::string_view id) const;

  std::vector<RankedResult> search(const Vector& query, std::size_t k = 20) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  Matrix vectors_;
  std::vector<Metadata> metadata_;
  std::string build_stamp_;

  void compute_stamp();
};

using RetrievalIndex = BasicRetrievalIndex<double>;

inline constexpr std::size_t kDefaultTopK = 20;

/// Embeds and normalizes every item. Nothing is returned on failure: an
/// embedder exception becomes EmbedderFault(id), a wrong-length vector
/// DimensionMismatch.
RetrievalIndex build_index(const std::vector<IndexItem>& items, Embedder& embedder);

inline std::vector<RankedResult> search(const RetrievalIndex& index, const Eigen::VectorXd& query,
                                        std::size_t k = kDefaultTopK) {
  return index.search(query, k);
}

struct QueryPair {
  std::string query_text;
  std::string gt_id;
};

struct RecallReport {
  std::vector<std::size_t> ks;
  std::map<std::size_t, double> recall_at;
  std::size_t n_queries = 0;
};

RecallReport evaluate_recall(const RetrievalIndex& index, const std::vector<QueryPair>& pairs,
                             Embedder& embedder, std::vector<std::size_t> ks = {1, 5, 10});

/// Versioned text sidecar: header, dim, count, stamp, then one line per entry
/// with id, metadata (JSON) and the vector in shortest round-trip form.
void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

template <typename Scalar>
BasicRetrievalIndex<Scalar>::BasicRetrievalIndex(std::size_t dim, std::vector<std::string> ids,
                                                 const Matrix& rows, std::vector<Metadata> metadata,
                                                 bool rows_are_unit)
    : dim_(dim) {
  if (static_cast<std::size_t>(rows.rows()) != ids.size() || metadata.size() != ids.size())
    fail(ErrorCode::InvalidArgument, "ids, vectors and metadata differ in length");
  if (static_cast<std::size_t>(rows.cols()) != dim && !ids.empty())
    fail(ErrorCode::DimensionMismatch, "vector width differs from index dimension");

  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (ids[order[i]] == ids[order[i - 1]]) fail(ErrorCode::DuplicateId, "duplicate index id '" + ids[order[i]] + "'");

  vectors_.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(dim));
  ids_.reserve(ids.size());
  metadata_.reserve(ids.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(order[r]);
    if (rows_are_unit)
      vectors_.row(static_cast<Eigen::Index>(r)) = rows.row(src);
    else
      vectors_.row(static_cast<Eigen::Index>(r)) = normalize(rows.row(src).transpose()).transpose();
    ids_.push_back(std::move(ids[order[r]]));
    metadata_.push_back(std::move(metadata[order[r]]));
  }

  compute_stamp();
}

template <typename Scalar>
void BasicRetrievalIndex<Scalar>::compute_stamp() {
  // FNV-1a over ids and raw vector bytes: equal contents give equal stamps.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ull;
  };
  mix(&dim_, sizeof(dim_));
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    const std::size_t len = ids_[r].size();
    mix(&len, sizeof(len));
    mix(ids_[r].data(), len);
    mix(vectors_.row(static_cast<Eigen::Index>(r)).data(), dim_ * sizeof(Scalar));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  build_stamp_ = buf;
}

template <typename Scalar>
Eigen::Index BasicRetrievalIndex<Scalar>::find(std::string_view id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return -1;
  return static_cast<Eigen::Index>(it - ids_.begin());
}

template <typename Scalar>
auto BasicRetrievalIndex<Scalar>::vector(std::string_view id) const -> Vector {
  const auto row = find(id);
  if (row < 0) fail(ErrorCode::UnknownId, "no index entry '" + std::string(id) + "'");
  return vectors_.row(row).transpose();
}

template <typename Scalar>
std::vector<RankedResult> BasicRetrievalIndex<Scalar>::search(const Vector& query, std::size_t k) const {
  if (static_cast<std::size_t>(query.size()) != dim_)
    fail(ErrorCode::DimensionMismatch, "query has dimension " + std::to_string(query.size()) + ", index " +
                                           std::to_string(dim_));
  const Vector q = normalize(query);
  const std::size_t n = ids_.size();
  std::vector<Scalar> scores(n);
  for (std::size_t r = 0; r < n; ++r)
    scores[r] = std::clamp(vectors_.row(static_cast<Eigen::Index>(r)).dot(q), Scalar(-1), Scalar(1));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t top = std::min(k, n);
  // Rows are in ascending id order, so comparing row indices applies the tie rule.
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(), better);

  std::vector<RankedResult> out;
  out.reserve(top);
  for (std::size_t i = 0; i < top; ++i)
    out.push_back({ids_[order[i]], static_cast<double>(scores[order[i]]), i + 1});
  return out;
}

}  // namespace cutstudio::retrieval
