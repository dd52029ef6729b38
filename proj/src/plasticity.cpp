#include "spikesim/plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spikesim {

double trace_decay_read(const SpikeTrace& tr, double t_now, double tau) {
  if (t_now < tr.last_time) {
    throw std::invalid_argument("trace read at t=" + std::to_string(t_now) +
                                " before last update t=" +
                                std::to_string(tr.last_time));
  }
  return tr.k * std::exp(-(t_now - tr.last_time) / tau);
}

void trace_bump(SpikeTrace& tr, double t, double tau) {
  tr.k = trace_decay_read(tr, t, tau) + 1.0;
  tr.last_time = t;
}

void on_pre_spike(PlasticSynapseState& s, const SpikeTrace& post_trace,
                  const StdpParams& p, double t) {
  if (t < s.last_pre_update) {
    throw std::invalid_argument("pre-spike time regression in STDP update");
  }
  const double k_minus = trace_decay_read(post_trace, t, p.tau_minus);
  s.w = std::max(p.w_min, s.w - p.lambda * p.alpha * s.w * k_minus);
  s.last_pre_update = t;
}

void on_post_spike(PlasticSynapseState& s, const SpikeTrace& pre_trace,
                   const StdpParams& p, double t) {
  if (t < s.last_pre_update) {
    throw std::invalid_argument("post-spike time regression in STDP update");
  }
  const double k_plus = trace_decay_read(pre_trace, t, p.tau_plus);
  s.w += p.lambda * std::pow(p.w_ref, 1.0 - p.mu) * std::pow(s.w, p.mu) *
         k_plus;
}

}  // namespace spikesim
