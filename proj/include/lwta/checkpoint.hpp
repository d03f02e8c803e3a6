#pragma once

// Checkpoint = text header + concatenated STLW tensors.
//
//   LWTA-CHECKPOINT
//   version=1
//   iteration=<n>
//   seed=<u64>
//   layers=<L>
//   layer=<in> <blocks> <block_size> <activation> <weights> <bias 0|1>   (L lines)
//   config.<key>=<value>                                                 (any number)
//   tensors=<T>
//   end
//   <T STLW records in Network::parameters() order>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "lwta/network.hpp"

namespace lwta {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::size_t iteration = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
  Network<float> net;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ck);
// CheckpointError on a bad header, a version mismatch or malformed tensors.
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lwta
