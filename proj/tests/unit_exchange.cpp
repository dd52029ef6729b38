#include <chrono>
#include <stdexcept>
#include <thread>

#include "doctest.h"
#include "spikesim/exchange.hpp"
#include "spikesim/netbuild.hpp"
#include "spikesim/reference.hpp"
#include "support/net_fixtures.hpp"

using namespace spikesim;

namespace {

NetworkInstance small_net(double scale = 0.02) {
  BalancedNetOptions opts;
  opts.k_exc = 20;
  opts.k_inh = 5;
  opts.nu_ext_hz = 15000.0;
  return build_network(make_balanced_random_net(scale, opts));
}

}  // namespace

TEST_CASE("broadcast delivers to every peer and checks step monotonicity") {
  ExchangeFabric fabric(4);
  broadcast_spikes(fabric, 0, {0, 0, {1, 2}});
  CHECK(fabric.messages_sent() == 3);
  CHECK(fabric.spikes_sent() == 6);

  // Step regression from the same sender.
  CHECK_THROWS_AS(broadcast_spikes(fabric, 0, {0, 0, {}}),
                  std::invalid_argument);

  // One-rank fabric: broadcasting is a no-op.
  ExchangeFabric solo(1);
  broadcast_spikes(solo, 0, {0, 0, {5}});
  CHECK(solo.messages_sent() == 0);
  CHECK(solo.gather_round(0, 0).empty());
}

TEST_CASE("gather_round merges sorted and detects duplicate ownership") {
  ExchangeFabric fabric(3);
  broadcast_spikes(fabric, 1, {1, 0, {3}});
  broadcast_spikes(fabric, 2, {2, 0, {1, 7}});
  CHECK(fabric.gather_round(0, 0) == std::vector<VertexId>{1, 3, 7});

  // Empty rounds still complete.
  broadcast_spikes(fabric, 1, {1, 1, {}});
  broadcast_spikes(fabric, 2, {2, 1, {}});
  CHECK(fabric.gather_round(0, 1).empty());

  ExchangeFabric dup(3);
  broadcast_spikes(dup, 1, {1, 0, {4}});
  broadcast_spikes(dup, 2, {2, 0, {4}});
  CHECK_THROWS_AS(dup.gather_round(0, 0), std::runtime_error);
}

TEST_CASE("gather_round timeout names the missing sender") {
  ExchangeFabric fabric(3, 0.0, 50.0);
  broadcast_spikes(fabric, 1, {1, 0, {}});
  try {
    fabric.gather_round(0, 0);
    FAIL("expected timeout");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("missing senders: 2") != std::string::npos);
  }
}

TEST_CASE("rank-count invariance against the serial reference") {
  const NetworkInstance net = small_net();
  const Step steps = 300;
  const SpikeLog expect = run_reference(net, steps);
  REQUIRE(!expect.empty());

  for (int ranks : {1, 2, 4}) {
    const auto plan = fixtures::contiguous_plan(net.n_vertices(), ranks, 2);
    SimOptions opts;
    opts.n_steps = steps;
    const SimResult res = run_simulation(net, plan, opts);
    CHECK(res.log == expect);
    CHECK(res.spikes_emitted == expect.size());
    // Every emission goes to every peer exactly once.
    CHECK(res.spikes_sent == expect.size() * (ranks - 1));
  }
}

TEST_CASE("overlap on and off produce identical logs") {
  const NetworkInstance net = small_net();
  const auto plan = fixtures::contiguous_plan(net.n_vertices(), 2, 1);
  SimOptions on;
  on.n_steps = 300;
  on.overlap = true;
  SimOptions off = on;
  off.overlap = false;
  CHECK(run_simulation(net, plan, on).log ==
        run_simulation(net, plan, off).log);
}

TEST_CASE("injected latency changes wall time, not results") {
  const NetworkInstance net = small_net(0.01);
  const auto plan = fixtures::contiguous_plan(net.n_vertices(), 2, 1);
  SimOptions fast;
  fast.n_steps = 50;
  fast.overlap = false;
  const SimResult base = run_simulation(net, plan, fast);

  SimOptions slow = fast;
  slow.fabric_latency_ms = 2.0;
  const SimResult delayed = run_simulation(net, plan, slow);
  CHECK(delayed.log == base.log);
  // 50 sync rounds at 2 ms injected latency each.
  CHECK(delayed.stats[0].total_ms > 80.0);
  CHECK(delayed.stats[0].total_ms > base.stats[0].total_ms);
}

TEST_CASE("all-silent multi-rank network keeps advancing on empty rounds") {
  const auto net = fixtures::tiny_net(8, {{0, 5, 1.0, 2}, {6, 1, 1.0, 3}});
  const auto plan = fixtures::contiguous_plan(8, 4, 1);
  SimOptions opts;
  opts.n_steps = 2000;
  const SimResult res = run_simulation(net, plan, opts);
  CHECK(res.log.empty());
  CHECK(res.messages_sent == 4u * 3u * 2000u);
}

TEST_CASE("multi-rank audit stays clean and counters expose the split") {
  const NetworkInstance net = small_net(0.01);
  const auto plan = fixtures::contiguous_plan(net.n_vertices(), 2, 2);
  SimOptions opts;
  opts.n_steps = 200;
  opts.audit = true;
  const SimResult res = run_simulation(net, plan, opts);
  REQUIRE(res.audits.size() == 2);
  for (const AccessAudit& a : res.audits) CHECK(a.ok());
  for (int r = 0; r < 2; ++r) {
    CHECK(res.memory[r].owned == plan.owned[r].size());
    CHECK(res.memory[r].pre_table ==
          res.memory[r].owned + res.memory[r].remote_pre);
  }
}
