#pragma once

// Model checkpoint layout (all integers and floats little-endian):
//
//   offset 0   8 bytes   magic "MCTMCKPT"
//   offset 8   4 bytes   uint32 header length H
//   offset 12  H bytes   UTF-8 JSON header:
//                        {"format": "mctm-checkpoint", "version": 1, "K": K, "W": W,
//                         "vocab_hash": "<16 hex>", "vocabulary": [terms...],
//                         "layout": ["mu", "sigma", "beta"]}
//   then                 K float64          mu
//                        K*K float64        Sigma, row-major
//                        W*K float64        beta, row-major (row = word)

#include <filesystem>
#include <string>

#include "mctm/corpus.hpp"
#include "mctm/params.hpp"

namespace mctm {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  Vocabulary vocabulary;
  std::string vocab_hash;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const Vocabulary& vocabulary);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mctm
