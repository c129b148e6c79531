#include "bichunter/embedding.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "bichunter/error.hpp"
#include "support/synthetic.hpp"

namespace bichunter {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "bichunter_embedding_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Tokenize, SplitsOnNonAlphanumerics) {
  const auto tokens = tokenize("if (x_1>=foo.bar()) return 42;");
  const std::vector<std::string_view> expected = {"if", "x", "1", "foo", "bar", "return", "42"};
  EXPECT_EQ(tokens, expected);
  EXPECT_TRUE(tokenize("  ;;  ").empty());
}

TEST(HashEmbed, EmptyTextIsZeroVector) {
  const Eigen::VectorXd v = hash_embed("", 16, 0);
  ASSERT_EQ(v.size(), 16);
  EXPECT_EQ(v.norm(), 0.0);
}

TEST(HashEmbed, ReturnTokenMatchesReferenceHash) {
  // Frozen from an independent evaluation of the documented hash:
  // FNV-1a 64 over "return" from basis 0xcbf29ce484222325 ^ splitmix64(0)
  // gives 0xc9a10a144209bb24 (bucket 4 of 8); the sign hash from
  // splitmix64(1) has its top bit clear (+1).
  const TokenHash h = hash_token("return", 8, 0);
  EXPECT_EQ(h.bucket, 4u);
  EXPECT_EQ(h.sign, 1.0);
  EXPECT_EQ(fnv1a64("return", 0xcbf29ce484222325ULL ^ splitmix64(0)), 0xc9a10a144209bb24ULL);

  Eigen::VectorXd expected = Eigen::VectorXd::Zero(8);
  expected[4] = 1.0;
  EXPECT_EQ(hash_embed("return", 8, 0), expected);
}

TEST(HashEmbed, TwoTokensShareUnitNorm) {
  // "a" -> bucket 1 sign -1, "b" -> bucket 0 sign -1 under dim 8, seed 0.
  const Eigen::VectorXd v = hash_embed("a b", 8, 0);
  EXPECT_NEAR(v[1], -1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(v[0], -1.0 / std::sqrt(2.0), 1e-15);
}

TEST(HashEmbed, DeterministicAndUnitNorm) {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    std::string text;
    for (int t = 0; t < 1 + static_cast<int>(uniform_index(rng, 8)); ++t) text += "tok" + std::to_string(rng() % 97) + " ";
    const Eigen::VectorXd a = hash_embed(text, 768, 3);
    const Eigen::VectorXd b = hash_embed(text, 768, 3);
    EXPECT_EQ(a, b);
    EXPECT_NEAR(a.norm(), 1.0, 1e-6);
  }
  EXPECT_NE(hash_embed("foo bar", 64, 1), hash_embed("foo bar", 64, 2));
}

TEST(HashCounts, UnsignedUnnormalized) {
  const Eigen::VectorXd v = hash_counts("x x x y", 10000, 0);
  EXPECT_DOUBLE_EQ(v.sum(), 4.0);
  EXPECT_DOUBLE_EQ(v.maxCoeff(), 3.0);
  EXPECT_GE(v.minCoeff(), 0.0);
}

TEST(HashEmbed, RejectsZeroDim) { EXPECT_THROW(hash_embed("x", 0, 0), ConfigError); }

class PrecomputedTest : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus_ = testing::sentinel_corpus(4, 2);
    index_ = corpus_.index();
    matrix_ = embed_dataset(index_, 768, 0);
  }
  testing::SyntheticCorpus corpus_;
  DatasetIndex index_;
  EmbeddingMatrix matrix_;
};

TEST_F(PrecomputedTest, BinaryRoundTripIsFloat32Exact) {
  const auto path = scratch("emb.bin");
  write_embeddings_binary(path, matrix_);
  const EmbeddingMatrix loaded = load_precomputed(path, index_);
  EXPECT_EQ(loaded.dim(), 768);
  EXPECT_EQ(loaded.size(), index_.node_count());
  const Eigen::MatrixXd expected = matrix_.values().cast<float>().cast<double>();
  EXPECT_EQ(loaded.values(), expected);
}

TEST_F(PrecomputedTest, JsonlRoundTrip) {
  const auto path = scratch("emb.jsonl");
  write_embeddings_jsonl(path, matrix_);
  const EmbeddingMatrix loaded = load_precomputed(path, index_);
  EXPECT_EQ(loaded.dim(), 768);
  EXPECT_EQ(loaded.values(), matrix_.values().cast<float>().cast<double>());
}

TEST_F(PrecomputedTest, MissingNodeIsNamed) {
  std::vector<std::string> ids = matrix_.ids();
  const std::string dropped = ids.back();
  ids.pop_back();
  const EmbeddingMatrix partial(ids, matrix_.values().topRows(static_cast<Eigen::Index>(ids.size())));
  const auto path = scratch("partial.bin");
  write_embeddings_binary(path, partial);
  try {
    load_precomputed(path, index_);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(dropped), std::string::npos) << e.what();
  }
}

TEST(Precomputed, DimensionMismatchAndDuplicates) {
  const auto path = scratch("mismatch.jsonl");
  {
    std::ofstream out(path);
    std::string v768 = "[0";
    for (int i = 1; i < 768; ++i) v768 += ",0";
    std::string v767 = "[0";
    for (int i = 1; i < 767; ++i) v767 += ",0";
    out << R"({"node_id":"a","vector":)" << v768 << "]}\n";
    out << R"({"node_id":"b","vector":)" << v767 << "]}\n";
  }
  try {
    read_embedding_file(path);
    FAIL() << "expected dimension mismatch";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos) << e.what();
  }

  const auto dup = scratch("dup.jsonl");
  {
    std::ofstream out(dup);
    out << R"({"node_id":"a","vector":[1,2]})" << "\n" << R"({"node_id":"a","vector":[3,4]})" << "\n";
  }
  EXPECT_THROW(read_embedding_file(dup), DataError);
}

TEST(Precomputed, TruncatedBinaryRejected) {
  const auto path = scratch("trunc.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out.write(kBinaryEmbeddingMagic, 8);
    const unsigned char header[12] = {4, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0};  // dim 4, count 1
    out.write(reinterpret_cast<const char*>(header), 12);
  }
  EXPECT_THROW(read_embedding_file(path), DataError);
}

TEST(Precomputed, BinaryLayoutIsLittleEndian) {
  const EmbeddingMatrix m({"n1"}, Eigen::MatrixXd::Constant(1, 2, 1.0));
  const auto path = scratch("layout.bin");
  write_embeddings_binary(path, m);
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::vector<unsigned char> expected = {'B', 'I', 'C', 'E', 'M', 'B', '0', '1',  // magic
                                               2, 0, 0, 0,                              // dim
                                               1, 0, 0, 0, 0, 0, 0, 0,                  // count
                                               2, 0, 0, 0, 'n', '1',                    // id
                                               0, 0, 0x80, 0x3f, 0, 0, 0x80, 0x3f};     // 1.0f, 1.0f
  EXPECT_EQ(bytes, expected);
}

}  // namespace
}  // namespace bichunter
