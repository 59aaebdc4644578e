#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "grle/mec_model.hpp"
#include "grle/random.hpp"

namespace grle::test {

// A slot whose tasks draw size, rate and deadline from the given generator.
// Estimated and true rates coincide; capacities are 1 and jitter is 1.
inline SlotInput random_slot(Rng& rng, int devices, int servers, int k = 1, double deadline = 30.0) {
  SlotInput s;
  s.slot = k;
  for (int m = 0; m < devices; ++m) {
    Task t;
    t.device_id = m;
    t.slot = k;
    t.size_kbytes = rng.uniform(50.0, 100.0);
    t.deadline_ms = deadline;
    for (int n = 0; n < servers; ++n) t.true_rate_mbps.push_back(rng.uniform(20.0, 100.0));
    t.est_rate_mbps = t.true_rate_mbps;
    s.tasks.push_back(std::move(t));
  }
  s.jitter.assign(devices, 1.0);
  s.capacity_fraction.assign(servers, 1.0);
  s.capacity_est = s.capacity_fraction;
  return s;
}

// Queues left behind by some earlier traffic.
inline NetworkState random_state(Rng& rng, int devices, int servers, int k, double slot_ms) {
  NetworkState st = NetworkState::initial(devices, servers, 2);
  const double start = (k - 1) * slot_ms;
  for (auto& d : st.devices) d.last_arrival_ms = k > 1 ? rng.uniform(start - slot_ms, start + 10.0) : 0.0;
  for (auto& s : st.servers) s.free_at_ms = k > 1 ? rng.uniform(start - slot_ms, start + 20.0) : 0.0;
  return st;
}

inline OffloadingDecision uniform_decision(const SlotInput& slot, int server, int exit) {
  OffloadingDecision d;
  for (const auto& t : slot.tasks) d.assignments.push_back({t.device_id, server, exit});
  return d;
}

// Waiting times from the literal definition: the latest completion among tasks
// that reached the same server strictly earlier (or the server's prior
// backlog), minus this task's arrival, clamped at zero. Equal arrivals are
// served in device order. Also returns the arrival times it derived.
struct PairwiseWaits {
  std::vector<double> arrival;
  std::vector<double> wait;
};

inline PairwiseWaits pairwise_waits(const NetworkState& before, const SlotInput& s, const OffloadingDecision& d,
                                    const ExitTable& exits, double slot_ms) {
  const int devices = static_cast<int>(s.tasks.size());
  const int k = s.slot;
  PairwiseWaits out;
  std::vector<double> cmp(devices);
  out.arrival.resize(devices);
  for (int m = 0; m < devices; ++m) {
    const Task& t = s.tasks[m];
    const int n = d.assignments[m].server;
    const double t_com = t.size_kbytes * 8000.0 / (t.true_rate_mbps[n] * 1000.0);
    out.arrival[m] = k == 1 ? t_com : std::max(before.devices[m].last_arrival_ms, (k - 1) * slot_ms) + t_com;
    cmp[m] = exits.base_time(d.assignments[m].exit, before.servers[n].type) * s.jitter[m] / s.capacity_fraction[n];
  }
  out.wait.assign(devices, -1.0);
  std::function<double(int)> waiting = [&](int m) {
    if (out.wait[m] >= 0.0) return out.wait[m];
    const int n = d.assignments[m].server;
    double latest = before.servers[n].free_at_ms;
    for (int j = 0; j < devices; ++j) {
      if (j == m || d.assignments[j].server != n) continue;
      const bool earlier = out.arrival[j] < out.arrival[m] || (out.arrival[j] == out.arrival[m] && j < m);
      if (earlier) latest = std::max(latest, out.arrival[j] + waiting(j) + cmp[j]);
    }
    return out.wait[m] = std::max(0.0, latest - out.arrival[m]);
  };
  for (int m = 0; m < devices; ++m) waiting(m);
  return out;
}

// A random instance for the queue property: 1-8 devices, 1-3 servers,
// fluctuating capacity and jitter, leftover queues, random decision.
struct QueueInstance {
  NetworkState state;
  SlotInput slot;
  OffloadingDecision decision;
};

inline QueueInstance random_queue_instance(Rng& rng, double slot_ms) {
  QueueInstance q;
  const int devices = 1 + static_cast<int>(rng.below(8));
  const int servers = 1 + static_cast<int>(rng.below(3));
  const int k = 1 + static_cast<int>(rng.below(4));
  q.slot = random_slot(rng, devices, servers, k);
  for (auto& j : q.slot.jitter) j = rng.uniform(0.75, 1.25);
  for (auto& c : q.slot.capacity_fraction) c = rng.uniform(0.25, 1.0);
  q.slot.capacity_est = q.slot.capacity_fraction;
  q.state = random_state(rng, devices, servers, k, slot_ms);
  for (int m = 0; m < devices; ++m) {
    q.decision.assignments.push_back({m, static_cast<int>(rng.below(servers)), static_cast<int>(rng.below(5))});
  }
  return q;
}

}  // namespace grle::test
