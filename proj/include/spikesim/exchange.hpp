#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <vector>

#include "spikesim/decomposition.hpp"
#include "spikesim/engine.hpp"
#include "spikesim/network.hpp"
#include "spikesim/types.hpp"

namespace spikesim {

struct SpikeMessage {
  int sender = 0;
  Step emission_step = 0;
  std::vector<VertexId> ids;  // sorted ascending
};

// In-process stand-in for the interconnect: reliable, per-sender FIFO inbox
// queues with optional injected latency. One message per sender per round,
// possibly empty, is the round-completion discipline.
class ExchangeFabric {
 public:
  explicit ExchangeFabric(int n_ranks, double latency_ms = 0.0,
                          double timeout_ms = 30000.0);

  int n_ranks() const { return n_ranks_; }
  std::uint64_t messages_sent() const;
  std::uint64_t spikes_sent() const;

  void send(int to, SpikeMessage msg);

  // Enqueue to every other rank; emission steps must be monotone per sender.
  void broadcast(int rank, SpikeMessage msg);

  // Blocks until one message per peer for `step` is available (and past its
  // injected latency); returns the sorted union of their ids. Throws on
  // timeout, naming the missing senders, and on duplicate ids across senders.
  std::vector<VertexId> gather_round(int rank, Step step);

 private:
  struct Pending {
    SpikeMessage msg;
    std::chrono::steady_clock::time_point ready;
  };
  struct Inbox {
    std::mutex m;
    std::condition_variable cv;
    std::vector<std::deque<Pending>> per_sender;
  };

  int n_ranks_;
  double latency_ms_;
  double timeout_ms_;
  std::vector<std::unique_ptr<Inbox>> inboxes_;
  std::vector<Step> last_broadcast_;  // per sender, emission monotonicity
  std::mutex send_m_;
  std::uint64_t messages_sent_ = 0;
  std::uint64_t spikes_sent_ = 0;
};

// Enqueue msg to every other rank. Emission steps must be monotone per
// sender; a 1-rank fabric short-circuits to a no-op.
void broadcast_spikes(ExchangeFabric& fabric, int rank, SpikeMessage msg);

struct RankRunStats {
  double deliver_ms = 0.0;
  double update_ms = 0.0;
  double exchange_wait_ms = 0.0;
  double total_ms = 0.0;
  std::vector<double> step_ms;  // per-step wall time (filled when requested)
};

struct RunOptions {
  Step n_steps = 0;
  bool overlap = true;  // dedicated communication agent per rank
  bool record_step_times = false;
};

// Drives one rank for n_steps: compute workers deliver/update while the
// communication agent exchanges the previous update's spikes. With overlap
// off the exchange runs inline between steps; the spike log is identical
// either way.
RankRunStats run_rank_with_comm_agent(RankState& rs, ExchangeFabric& fabric,
                                      const RunOptions& opts);

struct SimOptions {
  Step n_steps = 0;
  bool overlap = true;
  bool audit = false;
  bool record_step_times = false;
  double fabric_latency_ms = 0.0;
  double gather_timeout_ms = 30000.0;
};

struct SimResult {
  SpikeLog log;  // merged, ascending (step, id)
  std::vector<MemoryCounters> memory;   // per rank
  std::vector<RankRunStats> stats;      // per rank
  std::vector<AccessAudit> audits;      // per rank (audit mode only)
  std::uint64_t messages_sent = 0;
  std::uint64_t spikes_sent = 0;
  std::uint64_t spikes_emitted = 0;
};

// Builds every rank of the plan and runs them concurrently over an in-process
// fabric.
SimResult run_simulation(const NetworkInstance& net, const PartitionPlan& plan,
                         const SimOptions& opts);

}  // namespace spikesim
