#include "bichunter/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <string>

#include <json.hpp>

#include "bichunter/error.hpp"

namespace bichunter {

namespace {

constexpr const char* kFormat = "bichunter-rankmodel";
constexpr int kFormatVersion = 1;

void put_f32(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  const std::array<char, 4> bytes = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                                     static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
  out.write(bytes.data(), 4);
}

double get_f32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (in.gcount() != 4) throw DataError("checkpoint truncated inside a parameter block");
  const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

void write_checkpoint(std::ostream& out, const RankModel& model, const CheckpointMeta& meta) {
  nlohmann::json blocks = nlohmann::json::array();
  model.for_each_block([&](const std::string& name, std::span<const double>, Eigen::Index rows, Eigen::Index cols) {
    blocks.push_back({{"name", name}, {"rows", rows}, {"cols", cols}});
  });
  const nlohmann::json header = {{"format", kFormat},
                                 {"version", kFormatVersion},
                                 {"input_dim", model.input_dim()},
                                 {"hidden_dim", model.hidden_dim()},
                                 {"layers", model.layers()},
                                 {"seed", meta.seed},
                                 {"config_hash", meta.config_hash},
                                 {"dtype", "float32-le"},
                                 {"blocks", blocks}};
  out << header.dump() << '\n';
  model.for_each_block([&](const std::string&, std::span<const double> values, Eigen::Index, Eigen::Index) {
    for (double v : values) put_f32(out, v);
  });
}

void save_checkpoint(const std::filesystem::path& path, const RankModel& model, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(out, model, meta);
}

RankModel read_checkpoint(std::istream& in, CheckpointMeta* meta) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint is empty");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
    if (header.at("format") != kFormat || header.at("version") != kFormatVersion) {
      throw DataError("unsupported checkpoint format");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  const int input_dim = header.at("input_dim").get<int>();
  const int hidden = header.at("hidden_dim").get<int>();
  const int layers = header.at("layers").get<int>();
  RankModel model = RankModel::zeros_like(RankModel::init(input_dim, hidden, layers, 0));

  const auto& blocks = header.at("blocks");
  std::size_t b = 0;
  model.for_each_block([&](const std::string& name, std::span<double> values, Eigen::Index rows, Eigen::Index cols) {
    if (b >= blocks.size() || blocks[b].at("name") != name || blocks[b].at("rows") != rows ||
        blocks[b].at("cols") != cols) {
      throw DataError("checkpoint block table does not match block '" + name + "'");
    }
    ++b;
    for (double& v : values) v = get_f32(in);
  });
  if (b != blocks.size()) throw DataError("checkpoint declares extra parameter blocks");
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint has trailing bytes");
  if (meta) {
    meta->seed = header.at("seed").get<std::uint64_t>();
    meta->config_hash = header.at("config_hash").get<std::uint64_t>();
  }
  return model;
}

RankModel load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in, meta);
}

}  // namespace bichunter
