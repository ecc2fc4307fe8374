#include "ampc/replay.hpp"

#include <string>

namespace ampc {

void ReplayBuffer::add_episode(Episode ep) {
  for (std::size_t i = 1; i < ep.transitions.size(); ++i) {
    if (ep.transitions[i].t != ep.transitions[i - 1].t + 1) {
      throw DataError("replay: transitions within an episode must be consecutive in time");
    }
  }
  total_ += ep.transitions.size();
  episodes_.push_back(std::move(ep));
}

std::vector<Transition> ReplayBuffer::all_transitions() const {
  std::vector<Transition> out;
  out.reserve(total_);
  for (const auto& ep : episodes_) {
    out.insert(out.end(), ep.transitions.begin(), ep.transitions.end());
  }
  return out;
}

std::size_t ReplayBuffer::segment_positions(int m, int k) const {
  if (m < 1 || k < 1) throw ArgumentError("replay: M and K must be >= 1");
  std::size_t n = 0;
  const std::size_t window = static_cast<std::size_t>(m) + k;
  for (const auto& ep : episodes_) {
    if (ep.transitions.size() >= window) n += ep.transitions.size() - window + 1;
  }
  return n;
}

Segment ReplayBuffer::segment_at(std::size_t ep_index, int start, int m, int k) const {
  const auto& tr = episodes_[ep_index].transitions;
  Segment seg;
  seg.adapt = std::span<const Transition>(tr.data() + start, static_cast<std::size_t>(m));
  seg.eval = std::span<const Transition>(tr.data() + start + m, static_cast<std::size_t>(k));
  seg.episode_id = tr[start].episode_id;
  seg.t0 = tr[start + m].t;
  return seg;
}

Segment ReplayBuffer::sample_segment(int m, int k, std::mt19937_64& rng) const {
  const std::size_t n = segment_positions(m, k);
  if (n == 0) {
    throw DataError("replay: no legal segment of length M+K=" + std::to_string(m + k) +
                    " (buffer holds " + std::to_string(total_) + " transitions)");
  }
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  std::size_t idx = dist(rng);
  const std::size_t window = static_cast<std::size_t>(m) + k;
  for (std::size_t e = 0; e < episodes_.size(); ++e) {
    const auto& tr = episodes_[e].transitions;
    if (tr.size() < window) continue;
    const std::size_t count = tr.size() - window + 1;
    if (idx < count) return segment_at(e, static_cast<int>(idx), m, k);
    idx -= count;
  }
  throw DataError("replay: segment index out of range");  // unreachable
}

std::vector<Transition> ReplayBuffer::sample_transitions(int n, std::mt19937_64& rng) const {
  if (total_ == 0) throw DataError("replay: buffer empty");
  std::uniform_int_distribution<std::size_t> dist(0, total_ - 1);
  std::vector<Transition> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::size_t idx = dist(rng);
    for (const auto& ep : episodes_) {
      if (idx < ep.transitions.size()) {
        out.push_back(ep.transitions[idx]);
        break;
      }
      idx -= ep.transitions.size();
    }
  }
  return out;
}

std::vector<Segment> ReplayBuffer::all_segments(int m, int k) const {
  std::vector<Segment> out;
  const std::size_t window = static_cast<std::size_t>(m) + k;
  for (std::size_t e = 0; e < episodes_.size(); ++e) {
    const auto& tr = episodes_[e].transitions;
    if (tr.size() < window) continue;
    for (std::size_t start = 0; start + window <= tr.size(); ++start) {
      out.push_back(segment_at(e, static_cast<int>(start), m, k));
    }
  }
  return out;
}

}  // namespace ampc
