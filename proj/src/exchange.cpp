#include "spikesim/exchange.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <exception>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace spikesim {

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// ExchangeFabric

ExchangeFabric::ExchangeFabric(int n_ranks, double latency_ms,
                               double timeout_ms)
    : n_ranks_(n_ranks), latency_ms_(latency_ms), timeout_ms_(timeout_ms) {
  if (n_ranks < 1) throw std::invalid_argument("fabric needs >= 1 rank");
  inboxes_.reserve(n_ranks);
  for (int r = 0; r < n_ranks; ++r) {
    auto box = std::make_unique<Inbox>();
    box->per_sender.resize(n_ranks);
    inboxes_.push_back(std::move(box));
  }
  last_broadcast_.assign(n_ranks, -1);
}

std::uint64_t ExchangeFabric::messages_sent() const { return messages_sent_; }
std::uint64_t ExchangeFabric::spikes_sent() const { return spikes_sent_; }

void ExchangeFabric::send(int to, SpikeMessage msg) {
  Inbox& box = *inboxes_.at(to);
  Pending p;
  p.ready = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                               std::chrono::duration<double, std::milli>(
                                   latency_ms_));
  const int sender = msg.sender;
  p.msg = std::move(msg);
  {
    std::lock_guard lk(box.m);
    box.per_sender.at(sender).push_back(std::move(p));
  }
  box.cv.notify_all();
}

void broadcast_spikes(ExchangeFabric& fabric, int rank, SpikeMessage msg) {
  fabric.broadcast(rank, std::move(msg));
}

void ExchangeFabric::broadcast(int rank, SpikeMessage msg) {
  {
    std::lock_guard lk(send_m_);
    if (msg.emission_step <= last_broadcast_.at(rank)) {
      throw std::invalid_argument(
          "broadcast step regression: rank " + std::to_string(rank) +
          " already broadcast step " +
          std::to_string(last_broadcast_[rank]));
    }
    last_broadcast_[rank] = msg.emission_step;
    messages_sent_ += static_cast<std::uint64_t>(n_ranks_ - 1);
    spikes_sent_ +=
        static_cast<std::uint64_t>(msg.ids.size()) * (n_ranks_ - 1);
  }
  msg.sender = rank;
  for (int to = 0; to < n_ranks_; ++to) {
    if (to == rank) continue;  // self-loop handled locally by the engine
    send(to, msg);
  }
}

std::vector<VertexId> ExchangeFabric::gather_round(int rank, Step step) {
  Inbox& box = *inboxes_.at(rank);
  std::vector<SpikeMessage> msgs;
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double, std::milli>(timeout_ms_));

  std::unique_lock lk(box.m);
  for (;;) {
    bool all_here = true;
    auto earliest_ready = Clock::time_point::max();
    for (int s = 0; s < n_ranks_; ++s) {
      if (s == rank) continue;
      auto& q = box.per_sender[s];
      if (q.empty()) {
        all_here = false;
        continue;
      }
      // Per-sender FIFO: heads are the next round of each sender.
      if (q.front().msg.emission_step != step) {
        throw std::logic_error("fabric: sender " + std::to_string(s) +
                               " head is step " +
                               std::to_string(q.front().msg.emission_step) +
                               ", expected " + std::to_string(step));
      }
      if (q.front().ready > Clock::now()) {
        all_here = false;
        earliest_ready = std::min(earliest_ready, q.front().ready);
      }
    }
    if (all_here) break;
    const auto wake = std::min(deadline, earliest_ready);
    if (box.cv.wait_until(lk, wake) == std::cv_status::timeout &&
        Clock::now() >= deadline) {
      std::ostringstream os;
      os << "gather_round timeout at rank " << rank << " step " << step
         << "; missing senders:";
      for (int s = 0; s < n_ranks_; ++s) {
        if (s != rank && box.per_sender[s].empty()) os << " " << s;
      }
      throw std::runtime_error(os.str());
    }
  }
  for (int s = 0; s < n_ranks_; ++s) {
    if (s == rank) continue;
    msgs.push_back(std::move(box.per_sender[s].front().msg));
    box.per_sender[s].pop_front();
  }
  lk.unlock();

  std::vector<VertexId> merged;
  for (const SpikeMessage& m : msgs) {
    merged.insert(merged.end(), m.ids.begin(), m.ids.end());
  }
  std::sort(merged.begin(), merged.end());
  if (std::adjacent_find(merged.begin(), merged.end()) != merged.end()) {
    throw std::runtime_error(
        "gather_round: duplicate global id from two senders (ownership must "
        "be a partition)");
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Worker pool: fixed thread-per-range compute workers plus a coordinator.

namespace {

class WorkerPool {
 public:
  explicit WorkerPool(int n_workers)
      : n_(n_workers), barrier_(n_workers + 1), errors_(n_workers) {
    workers_.reserve(n_);
    for (int k = 0; k < n_; ++k) {
      workers_.emplace_back([this, k] { loop(k); });
    }
  }

  ~WorkerPool() {
    stop_ = true;
    barrier_.arrive_and_wait();
    for (auto& w : workers_) w.join();
  }

  void run(const std::function<void(int)>& task) {
    task_ = &task;
    barrier_.arrive_and_wait();  // release workers
    barrier_.arrive_and_wait();  // wait for completion
    for (auto& e : errors_) {
      if (e) {
        auto err = e;
        e = nullptr;
        std::rethrow_exception(err);
      }
    }
  }

 private:
  void loop(int k) {
    for (;;) {
      barrier_.arrive_and_wait();
      if (stop_) return;
      try {
        (*task_)(k);
      } catch (...) {
        errors_[k] = std::current_exception();
      }
      barrier_.arrive_and_wait();
    }
  }

  int n_;
  std::barrier<> barrier_;
  std::vector<std::exception_ptr> errors_;
  const std::function<void(int)>* task_ = nullptr;
  volatile bool stop_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Per-rank driver

RankRunStats run_rank_with_comm_agent(RankState& rs, ExchangeFabric& fabric,
                                      const RunOptions& opts) {
  const int rank = rs.rank();
  const Step n_steps = opts.n_steps;
  RankRunStats stats;
  const auto run_t0 = Clock::now();

  std::unique_ptr<WorkerPool> pool;
  if (rs.n_threads() > 1) pool = std::make_unique<WorkerPool>(rs.n_threads());

  std::function<void(int)> deliver_task;
  std::function<void(int)> update_task;
  Step phase_step = 0;
  deliver_task = [&](int k) { rs.deliver_thread(k, phase_step); };
  update_task = [&](int k) { rs.update_thread(k, phase_step); };

  auto compute = [&](Step t) {
    phase_step = t;
    auto t0 = Clock::now();
    if (pool) {
      pool->run(deliver_task);
    } else {
      rs.deliver_thread(0, t);
    }
    stats.deliver_ms += ms_since(t0);
    t0 = Clock::now();
    if (pool) {
      pool->run(update_task);
    } else {
      rs.update_thread(0, t);
    }
    stats.update_ms += ms_since(t0);
  };

  if (!opts.overlap) {
    // Exchange runs inline between steps; results are identical, only the
    // timeline changes.
    for (Step t = 0; t < n_steps; ++t) {
      const auto step_t0 = Clock::now();
      rs.prepare_step(t);
      compute(t);
      SpikeSet local = rs.finish_step(t);
      const auto x0 = Clock::now();
      broadcast_spikes(fabric, rank, {rank, t, std::move(local)});
      auto remote = fabric.gather_round(rank, t);
      stats.exchange_wait_ms += ms_since(x0);
      rs.enqueue_spikes(remote, t);
      rs.seal_round(t);
      if (opts.record_step_times) stats.step_ms.push_back(ms_since(step_t0));
    }
    stats.total_ms = ms_since(run_t0);
    return stats;
  }

  // Overlapped mode: a dedicated communication agent broadcasts the previous
  // update's spikes and gathers the peers' while compute advances. Hand-offs
  // carry data by ownership transfer; the agent never touches rank state.
  struct Shared {
    std::mutex m;
    std::condition_variable cv;
    std::deque<SpikeMessage> outbox;
    std::deque<std::pair<Step, std::vector<VertexId>>> gathered;
    bool done = false;
    std::exception_ptr err;
  } sh;

  std::thread agent([&] {
    try {
      for (Step r = 0; r < n_steps; ++r) {
        SpikeMessage msg;
        {
          std::unique_lock lk(sh.m);
          sh.cv.wait(lk, [&] { return !sh.outbox.empty() || sh.done; });
          if (sh.outbox.empty()) return;  // aborted run
          msg = std::move(sh.outbox.front());
          sh.outbox.pop_front();
        }
        broadcast_spikes(fabric, rank, std::move(msg));
        auto ids = fabric.gather_round(rank, r);
        {
          std::lock_guard lk(sh.m);
          sh.gathered.push_back({r, std::move(ids)});
        }
        sh.cv.notify_all();
      }
    } catch (...) {
      {
        std::lock_guard lk(sh.m);
        sh.err = std::current_exception();
      }
      sh.cv.notify_all();
    }
  });

  // Enqueue completed rounds in order; block until everything up to `need`
  // is sealed (deliveries of age d_min depend on it).
  auto drain_until = [&](Step need) {
    std::unique_lock lk(sh.m);
    for (;;) {
      if (sh.err) std::rethrow_exception(sh.err);
      while (!sh.gathered.empty()) {
        auto [r, ids] = std::move(sh.gathered.front());
        sh.gathered.pop_front();
        lk.unlock();
        rs.enqueue_spikes(ids, r);
        rs.seal_round(r);
        lk.lock();
      }
      if (need < 0 || rs.sealed_watermark() >= need) return;
      sh.cv.wait(lk);
    }
  };

  try {
    for (Step t = 0; t < n_steps; ++t) {
      const auto step_t0 = Clock::now();
      const auto x0 = Clock::now();
      drain_until(t - rs.d_min_steps());
      stats.exchange_wait_ms += ms_since(x0);
      rs.prepare_step(t);
      compute(t);
      SpikeSet local = rs.finish_step(t);
      {
        std::lock_guard lk(sh.m);
        sh.outbox.push_back({rank, t, std::move(local)});
      }
      sh.cv.notify_all();
      if (opts.record_step_times) stats.step_ms.push_back(ms_since(step_t0));
    }
    drain_until(n_steps - 1);
  } catch (...) {
    {
      std::lock_guard lk(sh.m);
      sh.done = true;
    }
    sh.cv.notify_all();
    agent.join();
    throw;
  }
  {
    std::lock_guard lk(sh.m);
    sh.done = true;
  }
  sh.cv.notify_all();
  agent.join();
  stats.total_ms = ms_since(run_t0);
  return stats;
}

// ---------------------------------------------------------------------------
// Multi-rank driver

SimResult run_simulation(const NetworkInstance& net, const PartitionPlan& plan,
                         const SimOptions& opts) {
  EngineOptions eopts;
  eopts.audit = opts.audit;
  std::vector<RankState> ranks = build_all_rank_states(net, plan, eopts);

  ExchangeFabric fabric(plan.n_ranks, opts.fabric_latency_ms,
                        opts.gather_timeout_ms);

  SimResult result;
  result.stats.resize(plan.n_ranks);
  std::vector<std::exception_ptr> errors(plan.n_ranks);

  {
    std::vector<std::thread> drivers;
    drivers.reserve(plan.n_ranks);
    for (int r = 0; r < plan.n_ranks; ++r) {
      drivers.emplace_back([&, r] {
        try {
          RunOptions ro;
          ro.n_steps = opts.n_steps;
          ro.overlap = opts.overlap;
          ro.record_step_times = opts.record_step_times;
          result.stats[r] = run_rank_with_comm_agent(ranks[r], fabric, ro);
        } catch (...) {
          errors[r] = std::current_exception();
        }
      });
    }
    for (auto& d : drivers) d.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (RankState& rs : ranks) {
    result.log.insert(result.log.end(), rs.local_log().begin(),
                      rs.local_log().end());
    result.memory.push_back(rs.memory_counters());
    if (opts.audit) result.audits.push_back(rs.audit_report());
    result.spikes_emitted += rs.local_log().size();
  }
  std::sort(result.log.begin(), result.log.end());
  result.messages_sent = fabric.messages_sent();
  result.spikes_sent = fabric.spikes_sent();
  return result;
}

}  // namespace spikesim
