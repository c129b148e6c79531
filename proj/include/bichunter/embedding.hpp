#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "bichunter/dataset.hpp"

namespace bichunter {

inline constexpr int kDefaultEmbeddingDim = 768;
inline constexpr char kBinaryEmbeddingMagic[8] = {'B', 'I', 'C', 'E', 'M', 'B', '0', '1'};

/// Splits a code line into maximal runs of ASCII letters/digits. Bytes at
/// or above 0x80 count as token characters so UTF-8 identifiers stay whole.
std::vector<std::string_view> tokenize(std::string_view text);

/// 64-bit FNV-1a over `bytes`, starting from `basis` instead of the
/// standard offset basis.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis);

/// SplitMix64 finalizer, used to derive independent hash bases from a seed.
std::uint64_t splitmix64(std::uint64_t x);

/// Bucket and sign of one token under (dim, seed):
///   bucket = fnv1a64(token, FNV_OFFSET ^ splitmix64(seed)) mod dim
///   sign   = top bit of fnv1a64(token, FNV_OFFSET ^ splitmix64(seed + 1)) ? -1 : +1
struct TokenHash {
  std::size_t bucket;
  double sign;
};
TokenHash hash_token(std::string_view token, int dim, std::uint64_t seed);

/// Signed feature-hashing embedding, L2-normalized unless all-zero.
Eigen::VectorXd hash_embed(std::string_view text, int dim, std::uint64_t seed);

/// Unsigned token counts per bucket, unnormalized (bag-of-words variant).
Eigen::VectorXd hash_counts(std::string_view text, int dim, std::uint64_t seed);

/// One row per node id, all rows the same dimension.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::vector<std::string> ids, Eigen::MatrixXd values);

  int dim() const { return static_cast<int>(values_.cols()); }
  std::size_t size() const { return ids_.size(); }
  bool contains(const std::string& node_id) const { return rows_.contains(node_id); }
  Eigen::Ref<const Eigen::RowVectorXd> row(const std::string& node_id) const;
  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::MatrixXd& values() const { return values_; }

  /// Stacks the rows of `node_ids` into a matrix, in the given order.
  Eigen::MatrixXd gather(const std::vector<std::string>& node_ids) const;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Eigen::Index> rows_;
  Eigen::MatrixXd values_;
};

/// Hash-embeds the text of every node in the index (node file order).
EmbeddingMatrix embed_dataset(const DatasetIndex& index, int dim, std::uint64_t seed);

/// Loads JSONL or "BICEMB01" binary vectors (detected by the magic bytes)
/// and checks that every node in `index` has exactly one vector.
EmbeddingMatrix load_precomputed(const std::filesystem::path& path, const DatasetIndex& index);

/// Reads a vector file without checking it against a dataset.
EmbeddingMatrix read_embedding_file(const std::filesystem::path& path);

void write_embeddings_binary(const std::filesystem::path& path, const EmbeddingMatrix& matrix);
void write_embeddings_jsonl(const std::filesystem::path& path, const EmbeddingMatrix& matrix);

}  // namespace bichunter
