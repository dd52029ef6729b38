#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spikesim/engine.hpp"
#include "spikesim/exchange.hpp"
#include "spikesim/types.hpp"

namespace spikesim {

// Raster text format: one "time_ms neuron_global_id" line per spike,
// ascending by (time, id).
void write_raster(std::ostream& out, const SpikeLog& log, double dt);
SpikeLog read_raster(std::istream& in, double dt);

void write_memory_csv(std::ostream& out,
                      const std::vector<MemoryCounters>& per_rank);

// Per-step wall time and phase totals per rank.
void write_timing_csv(std::ostream& out,
                      const std::vector<RankRunStats>& per_rank);

}  // namespace spikesim
