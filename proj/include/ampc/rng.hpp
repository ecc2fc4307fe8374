#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "ampc/errors.hpp"

namespace ampc {

// splitmix64 step, used to mix label bytes into subsystem seeds
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives a subsystem seed from the master seed and a label. Toggling one
// subsystem leaves the streams of the others intact.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& label) {
  std::uint64_t h = splitmix64(master);
  for (unsigned char c : label) h = splitmix64(h ^ c);
  return h;
}

// Named RNG streams for one run: env, init, planner, sampler, noise.
// Engine states serialize to text so an interrupted run resumes exactly.
class RngSet {
 public:
  RngSet() = default;
  explicit RngSet(std::uint64_t master) : master_(master) {}

  std::mt19937_64& stream(const std::string& label) {
    auto it = engines_.find(label);
    if (it == engines_.end()) {
      it = engines_.emplace(label, std::mt19937_64(derive_seed(master_, label))).first;
    }
    return it->second;
  }

  std::uint64_t master() const { return master_; }

  std::string serialize() const {
    std::ostringstream os;
    os << master_ << "\n" << engines_.size() << "\n";
    for (const auto& [label, eng] : engines_) {
      os << label << "\n" << eng << "\n";
    }
    return os.str();
  }

  static RngSet deserialize(const std::string& text) {
    std::istringstream is(text);
    RngSet set;
    std::size_t n = 0;
    if (!(is >> set.master_ >> n)) throw ArtifactError("rng state: malformed header");
    is.ignore();
    for (std::size_t i = 0; i < n; ++i) {
      std::string label;
      if (!std::getline(is, label)) throw ArtifactError("rng state: missing label");
      std::mt19937_64 eng;
      if (!(is >> eng)) throw ArtifactError("rng state: malformed engine state for '" + label + "'");
      is.ignore();
      set.engines_.emplace(label, eng);
    }
    return set;
  }

 private:
  std::uint64_t master_ = 0;
  std::map<std::string, std::mt19937_64> engines_;
};

}  // namespace ampc
