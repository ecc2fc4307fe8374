#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ampc/linalg.hpp"

namespace ampc {

// Checkpoint file layout: a 4-byte little-endian header length, a JSON
// header (architecture, canonical parameter-order version, named block
// table, any extra metadata), then all blocks concatenated as raw
// little-endian 64-bit floats.
struct CheckpointBlock {
  std::string name;
  Vector data;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<CheckpointBlock> blocks;

  const Vector& block(const std::string& name) const;
  bool has_block(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<CheckpointBlock>& blocks);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ampc
