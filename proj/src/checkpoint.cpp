#include "ampc/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "ampc/errors.hpp"

namespace ampc {

const Vector& Checkpoint::block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b.data;
  }
  throw ArtifactError("checkpoint: missing block '" + name + "'");
}

bool Checkpoint::has_block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return true;
  }
  return false;
}

void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<CheckpointBlock>& blocks) {
  nlohmann::json header = meta;
  header["format_version"] = 1;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& b : blocks) {
    table.push_back({{"name", b.name}, {"len", b.data.size()}});
  }
  header["blocks"] = table;
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("checkpoint: cannot open '" + path + "' for writing");
  const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
  char lenbuf[4] = {static_cast<char>(hlen & 0xff), static_cast<char>((hlen >> 8) & 0xff),
                    static_cast<char>((hlen >> 16) & 0xff), static_cast<char>((hlen >> 24) & 0xff)};
  out.write(lenbuf, 4);
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& b : blocks) {
    out.write(reinterpret_cast<const char*>(b.data.data()),
              static_cast<std::streamsize>(b.data.size() * sizeof(double)));
  }
  if (!out) throw ArtifactError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("checkpoint: cannot open '" + path + "'");
  unsigned char lenbuf[4];
  if (!in.read(reinterpret_cast<char*>(lenbuf), 4)) {
    throw ArtifactError("checkpoint: truncated header in '" + path + "'");
  }
  const std::uint32_t hlen = static_cast<std::uint32_t>(lenbuf[0]) |
                             (static_cast<std::uint32_t>(lenbuf[1]) << 8) |
                             (static_cast<std::uint32_t>(lenbuf[2]) << 16) |
                             (static_cast<std::uint32_t>(lenbuf[3]) << 24);
  std::string htext(hlen, '\0');
  if (!in.read(htext.data(), hlen)) {
    throw ArtifactError("checkpoint: truncated header body in '" + path + "'");
  }
  Checkpoint ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("checkpoint: bad header JSON in '" + path + "': " + e.what());
  }
  if (!ckpt.meta.contains("blocks")) throw ArtifactError("checkpoint: header lacks block table");
  for (const auto& entry : ckpt.meta["blocks"]) {
    CheckpointBlock b;
    b.name = entry.at("name").get<std::string>();
    const std::size_t len = entry.at("len").get<std::size_t>();
    b.data.resize(len);
    if (!in.read(reinterpret_cast<char*>(b.data.data()),
                 static_cast<std::streamsize>(len * sizeof(double)))) {
      throw ArtifactError("checkpoint: truncated payload for block '" + b.name + "'");
    }
    ckpt.blocks.push_back(std::move(b));
  }
  return ckpt;
}

}  // namespace ampc
