#include "bichunter/embedding.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "bichunter/error.hpp"

namespace bichunter {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

bool is_token_char(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

// Little-endian byte codecs; the file format is fixed regardless of host order.
template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const std::string& what) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DataError("truncated embedding file while reading " + what);
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

struct RawEmbeddings {
  std::vector<std::string> ids;
  std::vector<std::vector<float>> rows;
  int dim = 0;
};

RawEmbeddings read_binary(std::istream& in) {
  RawEmbeddings raw;
  const auto dim = get_le<std::uint32_t>(in, "dim");
  const auto count = get_le<std::uint64_t>(in, "count");
  if (dim == 0) throw DataError("embedding file declares dim 0");
  raw.dim = static_cast<int>(dim);
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto id_len = get_le<std::uint32_t>(in, "record " + std::to_string(r) + " id length");
    std::string id(id_len, '\0');
    in.read(id.data(), id_len);
    if (in.gcount() != static_cast<std::streamsize>(id_len)) {
      throw DataError("truncated embedding file in record " + std::to_string(r));
    }
    std::vector<float> row(dim);
    for (std::uint32_t d = 0; d < dim; ++d) row[d] = get_le<float>(in, "vector of '" + id + "'");
    raw.ids.push_back(std::move(id));
    raw.rows.push_back(std::move(row));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("embedding file has trailing bytes after " + std::to_string(count) + " records");
  }
  return raw;
}

RawEmbeddings read_jsonl(std::istream& in, const std::string& source) {
  RawEmbeddings raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string loc = source + ":" + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(loc + ": malformed JSON: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("node_id") || !rec["node_id"].is_string() ||
        !rec.contains("vector") || !rec["vector"].is_array()) {
      throw DataError(loc + ": expected {\"node_id\": string, \"vector\": [numbers]}");
    }
    std::vector<float> row;
    row.reserve(rec["vector"].size());
    for (const auto& v : rec["vector"]) {
      if (!v.is_number()) throw DataError(loc + ": non-numeric vector entry");
      row.push_back(v.get<float>());
    }
    const std::string id = rec["node_id"].get<std::string>();
    if (raw.ids.empty()) {
      raw.dim = static_cast<int>(row.size());
      if (raw.dim == 0) throw DataError(loc + ": empty vector for '" + id + "'");
    } else if (static_cast<int>(row.size()) != raw.dim) {
      throw DataError(loc + ": dimension mismatch for '" + id + "': " + std::to_string(row.size()) +
                      " vs " + std::to_string(raw.dim));
    }
    raw.ids.push_back(id);
    raw.rows.push_back(std::move(row));
  }
  return raw;
}

EmbeddingMatrix to_matrix(RawEmbeddings raw) {
  Eigen::MatrixXd values(static_cast<Eigen::Index>(raw.rows.size()), raw.dim);
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    for (int d = 0; d < raw.dim; ++d) values(static_cast<Eigen::Index>(r), d) = raw.rows[r][d];
  }
  return EmbeddingMatrix(std::move(raw.ids), std::move(values));
}

}  // namespace

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_token_char(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_token_char(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

TokenHash hash_token(std::string_view token, int dim, std::uint64_t seed) {
  const std::uint64_t bucket_hash = fnv1a64(token, kFnvOffset ^ splitmix64(seed));
  const std::uint64_t sign_hash = fnv1a64(token, kFnvOffset ^ splitmix64(seed + 1));
  return {static_cast<std::size_t>(bucket_hash % static_cast<std::uint64_t>(dim)),
          (sign_hash >> 63) ? -1.0 : 1.0};
}

Eigen::VectorXd hash_embed(std::string_view text, int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  for (std::string_view token : tokenize(text)) {
    const TokenHash h = hash_token(token, dim, seed);
    v[static_cast<Eigen::Index>(h.bucket)] += h.sign;
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

Eigen::VectorXd hash_counts(std::string_view text, int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  for (std::string_view token : tokenize(text)) {
    v[static_cast<Eigen::Index>(hash_token(token, dim, seed).bucket)] += 1.0;
  }
  return v;
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, Eigen::MatrixXd values)
    : ids_(std::move(ids)), values_(std::move(values)) {
  if (static_cast<Eigen::Index>(ids_.size()) != values_.rows()) {
    throw ShapeError("embedding ids and rows differ in count");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!rows_.emplace(ids_[i], static_cast<Eigen::Index>(i)).second) {
      throw DataError("duplicate embedding entry for node '" + ids_[i] + "'");
    }
  }
}

Eigen::Ref<const Eigen::RowVectorXd> EmbeddingMatrix::row(const std::string& node_id) const {
  auto it = rows_.find(node_id);
  if (it == rows_.end()) throw DataError("no embedding for node '" + node_id + "'");
  return values_.row(it->second);
}

Eigen::MatrixXd EmbeddingMatrix::gather(const std::vector<std::string>& node_ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(node_ids.size()), values_.cols());
  for (std::size_t i = 0; i < node_ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = row(node_ids[i]);
  return out;
}

EmbeddingMatrix embed_dataset(const DatasetIndex& index, int dim, std::uint64_t seed) {
  std::vector<std::string> ids;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(index.node_count()), dim);
  Eigen::Index r = 0;
  for (const LineNode& node : index.nodes()) {
    ids.push_back(node.node_id);
    values.row(r++) = hash_embed(node.text, dim, seed).transpose();
  }
  return EmbeddingMatrix(std::move(ids), std::move(values));
}

EmbeddingMatrix read_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() == 8 && std::memcmp(magic.data(), kBinaryEmbeddingMagic, 8) == 0) {
    return to_matrix(read_binary(in));
  }
  in.clear();
  in.seekg(0);
  return to_matrix(read_jsonl(in, path.string()));
}

EmbeddingMatrix load_precomputed(const std::filesystem::path& path, const DatasetIndex& index) {
  EmbeddingMatrix matrix = read_embedding_file(path);
  for (const LineNode& node : index.nodes()) {
    if (!matrix.contains(node.node_id)) {
      throw DataError("embedding file '" + path.string() + "' has no vector for node '" + node.node_id + "'");
    }
  }
  return matrix;
}

void write_embeddings_binary(const std::filesystem::path& path, const EmbeddingMatrix& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding file '" + path.string() + "'");
  out.write(kBinaryEmbeddingMagic, 8);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.dim()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(matrix.size()));
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    const std::string& id = matrix.ids()[i];
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (int d = 0; d < matrix.dim(); ++d) {
      put_le<float>(out, static_cast<float>(matrix.values()(static_cast<Eigen::Index>(i), d)));
    }
  }
}

void write_embeddings_jsonl(const std::filesystem::path& path, const EmbeddingMatrix& matrix) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embedding file '" + path.string() + "'");
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    std::vector<float> row(static_cast<std::size_t>(matrix.dim()));
    for (int d = 0; d < matrix.dim(); ++d) {
      row[static_cast<std::size_t>(d)] = static_cast<float>(matrix.values()(static_cast<Eigen::Index>(i), d));
    }
    out << nlohmann::json{{"node_id", matrix.ids()[i]}, {"vector", row}}.dump() << '\n';
  }
}

}  // namespace bichunter
