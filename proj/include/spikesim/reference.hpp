#pragma once

#include "spikesim/network.hpp"
#include "spikesim/types.hpp"

namespace spikesim {

// Straightforward single-threaded event loop over one flat edge list, sharing
// only the neuron/plasticity update functions and the canonical accumulation
// order with the engine. Ground truth for equivalence tests and the `verify`
// subcommand.
SpikeLog run_reference(const NetworkInstance& net, Step n_steps);

}  // namespace spikesim
