#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "grle/actor_critic.hpp"

namespace grle {

// Share of tasks finished within their deadline.
double ssp(const EpisodeLog& log);
// Accuracy summed over successful tasks, divided by all tasks.
double avg_accuracy(const EpisodeLog& log);
// Successful tasks per millisecond of simulated time (K * slot length).
double avg_throughput(const EpisodeLog& log, double slot_ms);

// Q / Q_oracle; a slot where the oracle earns nothing counts as 1.
double normalized_reward(double reward, double oracle_reward);
// Mean over the trailing min(window, available) entries at every position.
std::vector<double> moving_average(std::span<const double> trace, std::size_t window = 50);

struct MetricsReport {
  std::size_t slots = 0;
  std::size_t tasks = 0;
  std::size_t successes = 0;
  double ssp = 0.0;
  double avg_accuracy = 0.0;
  double avg_throughput = 0.0;
  double mean_reward = 0.0;
  std::vector<double> normalized;     // empty unless the oracle ran
  std::vector<double> normalized_ma;  // window 50
  std::vector<double> losses;         // training losses in order
};

MetricsReport summarize(const EpisodeLog& log, double slot_ms);

// One row per task.
void write_log_csv(std::ostream& out, const EpisodeLog& log, const ExitTable& exits);

struct MetricsRow {
  std::string scenario;
  std::string policy;
  std::uint64_t seed = 0;
  int devices = 0;
  int servers = 0;
  double slot_ms = 0.0;
  MetricsReport report;
};
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

// slot, reward, oracle_reward, qhat, qhat_ma50
void write_qhat_csv(std::ostream& out, const EpisodeLog& log);

}  // namespace grle
