#include "spikesim/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace spikesim {

namespace {

// Exact cross-term: integral of the exponentially decaying kernel against the
// membrane Green's function over one step, including the MOhm*pA -> mV scale.
double cross_term(double tau_m, double tau_s, double r_mohm, double dt) {
  const double r_eff = r_mohm * 1e-3;  // mV per pA
  if (tau_s == tau_m) {
    // Degenerate limit: (t * e^{-t/tau}) kernel response.
    return r_eff * (dt / tau_m) * std::exp(-dt / tau_m);
  }
  return r_eff * tau_s / (tau_s - tau_m) *
         (std::exp(-dt / tau_s) - std::exp(-dt / tau_m));
}

}  // namespace

Propagators make_propagators(const NeuronParams& p, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("make_propagators: dt must be > 0");
  }
  if (!(p.tau_m > 0.0) || !(p.tau_syn_exc > 0.0) || !(p.tau_syn_inh > 0.0)) {
    throw std::invalid_argument("make_propagators: time constants must be > 0");
  }
  Propagators pr;
  pr.dt = dt;
  pr.p_mm = std::exp(-dt / p.tau_m);
  pr.p_ee = std::exp(-dt / p.tau_syn_exc);
  pr.p_ii = std::exp(-dt / p.tau_syn_inh);
  pr.p_me = cross_term(p.tau_m, p.tau_syn_exc, p.r_mohm, dt);
  pr.p_mi = cross_term(p.tau_m, p.tau_syn_inh, p.r_mohm, dt);
  pr.p_ext = p.r_mohm * 1e-3 * (1.0 - pr.p_mm);
  pr.refractory_steps =
      static_cast<std::int32_t>(std::lround(p.t_refractory / dt));
  return pr;
}

bool step_neuron(NeuronState& s, const NeuronParams& p, const Propagators& pr) {
  if (s.refractory_steps_left > 0) {
    --s.refractory_steps_left;
    s.syn_exc *= pr.p_ee;
    s.syn_inh *= pr.p_ii;
    s.u = p.u_reset;
    return false;
  }

  double drive_exc = s.syn_exc;
  double drive_inh = s.syn_inh;
  if (p.synapse_mode == SynapseMode::conductance_based) {
    // Conductance kernels decay within the step; the voltage factor is frozen
    // at the step-start membrane potential.
    drive_exc = s.syn_exc * (s.u - p.e_syn_exc);
    drive_inh = s.syn_inh * (s.u - p.e_syn_inh);
  }

  s.u = p.u_rest + (s.u - p.u_rest) * pr.p_mm + pr.p_ext * s.i_ext +
        pr.p_me * drive_exc + pr.p_mi * drive_inh;
  s.syn_exc *= pr.p_ee;
  s.syn_inh *= pr.p_ii;

  if (s.u >= p.theta) {
    s.u = p.u_reset;
    s.refractory_steps_left = pr.refractory_steps;
    return true;
  }
  return false;
}

}  // namespace spikesim
