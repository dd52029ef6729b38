#pragma once

namespace spikesim {

// Pair-based STDP: multiplicative depression, power-law potentiation.
struct StdpParams {
  double lambda = 0.1;   // learning rate
  double alpha = 0.057;  // depression scale
  double mu = 0.4;       // potentiation exponent in [0, 1]
  double tau_plus = 15.0;
  double tau_minus = 15.0;
  double w_ref = 45.0;  // reference weight of the power law (pA)
  double w_min = 0.0;

  friend bool operator==(const StdpParams&, const StdpParams&) = default;
};

struct PlasticSynapseState {
  double w = 0.0;
  double last_pre_update = 0.0;
};

// Exponentially decaying spike trace; bumped by 1 at each spike of its train.
struct SpikeTrace {
  double k = 0.0;
  double last_time = 0.0;
};

// Trace value decayed to t_now; does not mutate. Throws on time regression.
double trace_decay_read(const SpikeTrace& tr, double t_now, double tau);

// Decay to t, then add one spike.
void trace_bump(SpikeTrace& tr, double t, double tau);

// Depression on a pre-synaptic spike at time t:
//   w' = max(w_min, w - lambda * alpha * w * K_minus(t))
void on_pre_spike(PlasticSynapseState& s, const SpikeTrace& post_trace,
                  const StdpParams& p, double t);

// Potentiation on a post-synaptic spike at time t:
//   w' = w + lambda * w_ref^(1-mu) * w^mu * K_plus(t)
void on_post_spike(PlasticSynapseState& s, const SpikeTrace& pre_trace,
                   const StdpParams& p, double t);

}  // namespace spikesim
