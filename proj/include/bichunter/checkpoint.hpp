#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "bichunter/gcnrank.hpp"

namespace bichunter {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

/// One JSON header line (dims, layer count, seed, config hash, block
/// table) followed by every parameter block as little-endian float32, in
/// RankModel::for_each_block order. Column-major within a block.
void write_checkpoint(std::ostream& out, const RankModel& model, const CheckpointMeta& meta);
void save_checkpoint(const std::filesystem::path& path, const RankModel& model, const CheckpointMeta& meta);

RankModel read_checkpoint(std::istream& in, CheckpointMeta* meta = nullptr);
RankModel load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace bichunter
