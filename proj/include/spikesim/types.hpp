#pragma once

#include <cstdint>
#include <vector>

namespace spikesim {

using VertexId = std::uint32_t;
using EdgeIndex = std::uint32_t;
using Step = std::int64_t;

struct Edge {
  VertexId pre;
  VertexId post;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Set of pre-synaptic vertex ids that spiked in one step, sorted ascending.
using SpikeSet = std::vector<VertexId>;

struct SpikeEvent {
  Step step;
  VertexId id;

  friend bool operator==(const SpikeEvent&, const SpikeEvent&) = default;
  friend auto operator<=>(const SpikeEvent&, const SpikeEvent&) = default;
};

using SpikeLog = std::vector<SpikeEvent>;

}  // namespace spikesim
