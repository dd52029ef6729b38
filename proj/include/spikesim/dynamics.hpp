#pragma once

#include <cstdint>

namespace spikesim {

enum class SynapseMode : std::uint8_t { current_based, conductance_based };
enum class Polarity : std::uint8_t { exc, inh };

// Units: times in ms, voltages in mV, currents in pA, resistance in MOhm,
// conductances in nS. Kernel state is pA in current mode, nS in conductance
// mode.
struct NeuronParams {
  double tau_m = 10.0;
  double u_rest = -70.0;
  double r_mohm = 40.0;
  double theta = -55.0;
  double u_reset = -70.0;
  double t_refractory = 2.0;
  double tau_syn_exc = 0.5;
  double tau_syn_inh = 0.5;
  SynapseMode synapse_mode = SynapseMode::current_based;
  double e_syn_exc = 0.0;
  double e_syn_inh = -85.0;

  friend bool operator==(const NeuronParams&, const NeuronParams&) = default;
};

struct NeuronState {
  double u = -70.0;
  double syn_exc = 0.0;
  double syn_inh = 0.0;
  std::int32_t refractory_steps_left = 0;
  double i_ext = 0.0;
};

// Per-step coefficients of the exact one-step solution of the linear
// (membrane, kernel) system. p_me/p_mi map kernel state at step start into
// the membrane increment; p_ext does the same for a constant current.
struct Propagators {
  double dt = 0.1;
  double p_mm = 0.0;  // membrane decay exp(-dt/tau_m)
  double p_ee = 0.0;  // exc kernel decay
  double p_ii = 0.0;  // inh kernel decay
  double p_me = 0.0;  // exc kernel -> membrane (mV per kernel unit)
  double p_mi = 0.0;
  double p_ext = 0.0;  // constant current -> membrane (mV per pA)
  std::int32_t refractory_steps = 0;

  friend bool operator==(const Propagators&, const Propagators&) = default;
};

Propagators make_propagators(const NeuronParams& p, double dt);

inline void deposit(NeuronState& s, double weight, Polarity polarity) {
  if (polarity == Polarity::exc) {
    s.syn_exc += weight;
  } else {
    s.syn_inh += weight;
  }
}

// One exact step. Returns true when the neuron spiked (u reached theta at the
// end of the step); u is then pinned at u_reset for the refractory window.
bool step_neuron(NeuronState& s, const NeuronParams& p, const Propagators& pr);

}  // namespace spikesim
