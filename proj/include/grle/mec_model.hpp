#pragma once

#include <algorithm>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "grle/common.hpp"

namespace grle {

// ---------------------------------------------------------------------------
// Timing and reward arithmetic. Units: KBytes (1000 bytes), Mbps (1000 bits
// per ms), milliseconds.
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar transmission_time(Scalar size_kbytes, Scalar rate_mbps) {
  return size_kbytes * Scalar(8000) / (rate_mbps * Scalar(1000));
}

// Absolute time a device's task reaches its server. The uplink of a device is
// sequential: a transmission starts at the later of the slot start and the
// arrival of the device's previous task.
template <typename Scalar>
Scalar arrival_time(Scalar last_arrival_ms, int slot, Scalar slot_len_ms, Scalar t_com) {
  if (slot <= 1) {
    return t_com;
  }
  return std::max(last_arrival_ms, Scalar(slot - 1) * slot_len_ms) + t_com;
}

// Queueing delay at a FCFS server whose accepted work finishes at free_at_ms.
template <typename Scalar>
Scalar waiting_time(Scalar free_at_ms, Scalar arrival_ms) {
  return std::max(Scalar(0), free_at_ms - arrival_ms);
}

template <typename Scalar>
Scalar computation_time(Scalar base_time_ms, Scalar jitter, Scalar capacity_fraction) {
  return base_time_ms * jitter / capacity_fraction;
}

enum class PsiMode { normalized, literal };

// Latency discount. literal: 1 - sigmoid(5t/deadline), which is 0.5 at t = 0.
// normalized: twice that, so it tends to 1 as t -> 0.
template <typename Scalar>
Scalar psi(Scalar t_total_ms, Scalar deadline_ms, PsiMode mode = PsiMode::normalized) {
  const Scalar value = Scalar(1) - sigmoid(Scalar(5) * t_total_ms / deadline_ms);
  return mode == PsiMode::normalized ? Scalar(2) * value : value;
}

PsiMode parse_psi_mode(const std::string& text);
std::string to_string(PsiMode mode);

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Task {
  int device_id = 0;
  int slot = 1;
  double size_kbytes = 0.0;
  double deadline_ms = 0.0;
  std::vector<double> true_rate_mbps;
  std::vector<double> est_rate_mbps;
  // Per-server reachability; a missing link means the pair has no edge.
  std::vector<bool> linked;

  int num_servers() const { return static_cast<int>(true_rate_mbps.size()); }
  bool reachable(int server) const { return linked.empty() || linked[server]; }
};

struct EarlyExitProfile {
  int exit_id = 0;
  double accuracy = 0.0;
  Vector base_time_ms;  // one entry per server type
};

// Ordered candidate exits together with the server types they were timed on.
class ExitTable {
 public:
  ExitTable() = default;
  ExitTable(std::vector<std::string> server_types, std::vector<EarlyExitProfile> exits);

  // Candidate exits 1, 3, 4, 7, 17 of VGG-16 on RTX 2080Ti and GTX 1080Ti.
  static ExitTable vgg16_default();

  int size() const { return static_cast<int>(exits_.size()); }
  int num_server_types() const { return static_cast<int>(server_types_.size()); }
  const EarlyExitProfile& operator[](int exit) const { return exits_[exit]; }
  const std::vector<EarlyExitProfile>& exits() const { return exits_; }
  const std::vector<std::string>& server_types() const { return server_types_; }
  double base_time(int exit, int server_type) const { return exits_[exit].base_time_ms(server_type); }
  double max_accuracy() const;
  int final_exit() const { return size() - 1; }

 private:
  std::vector<std::string> server_types_;
  std::vector<EarlyExitProfile> exits_;
};

// Whitespace-separated columns: exit_id accuracy <one column per server type>.
// The first non-comment line is the header naming the server types.
ExitTable parse_exit_table(std::istream& in);
ExitTable load_exit_table(const std::string& path);
void write_exit_table(std::ostream& out, const ExitTable& table);

struct ServerState {
  int server_id = 0;
  int type = 0;
  double free_at_ms = 0.0;
};

struct DeviceState {
  int device_id = 0;
  double last_arrival_ms = 0.0;
};

struct NetworkState {
  std::vector<DeviceState> devices;
  std::vector<ServerState> servers;

  static NetworkState initial(int num_devices, int num_servers, int num_server_types);
};

// Everything drawn for one slot. Policies read the estimated fields; the
// committed transition uses the true ones.
struct SlotInput {
  int slot = 1;
  std::vector<Task> tasks;
  std::vector<double> jitter;             // per task, multiplies computation time
  std::vector<double> capacity_fraction;  // per server, true available share
  std::vector<double> capacity_est;       // per server, as seen by policies
};

enum class View { estimated, actual };

struct Assignment {
  int device_id = 0;
  int server = 0;
  int exit = 0;  // index into ExitTable
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct OffloadingDecision {
  std::vector<Assignment> assignments;
  friend bool operator==(const OffloadingDecision&, const OffloadingDecision&) = default;
};

struct SlotOutcome {
  int device_id = 0;
  int server = 0;
  int exit = 0;
  double arrival_ms = 0.0;
  double t_com = 0.0;
  double t_wait = 0.0;
  double t_cmp = 0.0;
  double t_total = 0.0;
  double deadline_ms = 0.0;
  double accuracy = 0.0;
  double reward = 0.0;
  bool success = false;
};

struct ModelParams {
  double slot_len_ms = 30.0;
  PsiMode psi_mode = PsiMode::normalized;
};

struct SlotResult {
  std::vector<SlotOutcome> outcomes;  // in task order
  double reward = 0.0;
};

// Precomputes per (task, server, exit) timings for one slot against a fixed
// queue snapshot, then scores joint decisions without touching the snapshot.
class SlotEvaluator {
 public:
  SlotEvaluator(const NetworkState& state, const SlotInput& slot, const ExitTable& exits,
                const ModelParams& params, View view);

  int num_tasks() const { return num_tasks_; }
  int num_servers() const { return num_servers_; }
  int num_exits() const { return num_exits_; }

  // choice[i] = server * num_exits + exit for task i. No validation.
  double reward(std::span<const int> choice) const;
  SlotResult evaluate(std::span<const int> choice) const;

  // Validates a decision and converts it to the task-ordered choice vector.
  std::vector<int> encode(const OffloadingDecision& decision) const;
  OffloadingDecision decode(std::span<const int> choice) const;

 private:
  template <typename Visit>
  void simulate(std::span<const int> choice, Visit&& visit) const;

  const NetworkState* state_;
  const SlotInput* slot_;
  const ExitTable* exits_;
  ModelParams params_;
  int num_tasks_;
  int num_servers_;
  int num_exits_;
  Matrix t_com_;   // tasks x servers
  Matrix arrival_; // tasks x servers
  Matrix t_cmp_;   // tasks x (servers * exits)
};

double slot_reward(std::span<const SlotOutcome> outcomes);

// Applies a decision and advances device and server queues.
SlotResult apply_decision(NetworkState& state, const SlotInput& slot, const OffloadingDecision& decision,
                          const ExitTable& exits, const ModelParams& params, View view = View::actual);

// Reward of a decision evaluated on a copy of the state.
double evaluate_decision(const NetworkState& state, const SlotInput& slot, const OffloadingDecision& decision,
                         const ExitTable& exits, const ModelParams& params, View view);

}  // namespace grle
