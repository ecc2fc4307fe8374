#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "ampc/dynamics.hpp"

namespace ampc {

// One trajectory segment: M adaptation transitions immediately followed by
// K evaluation transitions from the same episode. The slices are contiguous
// in time; the adaptation slice ends exactly where the evaluation slice
// starts, so the hidden environment configuration can be assumed constant
// across the whole window.
struct Segment {
  std::span<const Transition> adapt;
  std::span<const Transition> eval;
  long episode_id = 0;
  int t0 = 0;  // first evaluation timestep
};

struct Episode {
  std::string descriptor;  // bookkeeping only, never fed to training
  std::vector<Transition> transitions;
};

// Episode store for meta-training. One writer between read phases; segment
// sampling is uniform over all legal (episode, t) positions, with
// replacement across meta-batches.
class ReplayBuffer {
 public:
  void add_episode(Episode ep);

  std::size_t episode_count() const { return episodes_.size(); }
  std::size_t total_transitions() const { return total_; }
  const std::vector<Episode>& episodes() const { return episodes_; }

  // flat view over every stored transition
  std::vector<Transition> all_transitions() const;

  // number of legal segment positions for slice lengths (M, K)
  std::size_t segment_positions(int m, int k) const;

  Segment sample_segment(int m, int k, std::mt19937_64& rng) const;

  // uniform over all stored transitions, with replacement
  std::vector<Transition> sample_transitions(int n, std::mt19937_64& rng) const;

  // deterministic enumeration of every legal segment (evaluation order)
  std::vector<Segment> all_segments(int m, int k) const;

 private:
  Segment segment_at(std::size_t ep_index, int start, int m, int k) const;

  std::vector<Episode> episodes_;
  std::size_t total_ = 0;
};

}  // namespace ampc
