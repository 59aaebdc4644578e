#include "grle/metrics.hpp"

#include <ostream>

namespace grle {

namespace {

struct Counts {
  std::size_t tasks = 0;
  std::size_t successes = 0;
  double accuracy = 0.0;
};

// Accumulation order (slot, then task) is part of the CSV contract: an
// independent recompute over log.csv rows reproduces these sums exactly.
Counts count(const EpisodeLog& log) {
  Counts c;
  for (const auto& s : log.slots) {
    for (const auto& o : s.outcomes) {
      ++c.tasks;
      if (o.success) {
        ++c.successes;
        c.accuracy += o.accuracy;
      }
    }
  }
  return c;
}

}  // namespace

double ssp(const EpisodeLog& log) {
  const Counts c = count(log);
  return c.tasks == 0 ? 0.0 : static_cast<double>(c.successes) / static_cast<double>(c.tasks);
}

double avg_accuracy(const EpisodeLog& log) {
  const Counts c = count(log);
  return c.tasks == 0 ? 0.0 : c.accuracy / static_cast<double>(c.tasks);
}

double avg_throughput(const EpisodeLog& log, double slot_ms) {
  const Counts c = count(log);
  const double horizon = static_cast<double>(log.slots.size()) * slot_ms;
  return horizon <= 0.0 ? 0.0 : static_cast<double>(c.successes) / horizon;
}

double normalized_reward(double reward, double oracle_reward) {
  if (oracle_reward <= 0.0) return 1.0;
  return reward / oracle_reward;
}

std::vector<double> moving_average(std::span<const double> trace, std::size_t window) {
  std::vector<double> out;
  out.reserve(trace.size());
  if (window == 0) window = 1;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = first; j <= i; ++j) sum += trace[j];
    out.push_back(sum / static_cast<double>(i + 1 - first));
  }
  return out;
}

MetricsReport summarize(const EpisodeLog& log, double slot_ms) {
  MetricsReport r;
  const Counts c = count(log);
  r.slots = log.slots.size();
  r.tasks = c.tasks;
  r.successes = c.successes;
  r.ssp = ssp(log);
  r.avg_accuracy = avg_accuracy(log);
  r.avg_throughput = avg_throughput(log, slot_ms);
  double total = 0.0;
  bool have_oracle = !log.slots.empty();
  for (const auto& s : log.slots) {
    total += s.reward;
    have_oracle = have_oracle && s.oracle_reward.has_value();
    if (s.loss) r.losses.push_back(*s.loss);
  }
  r.mean_reward = log.slots.empty() ? 0.0 : total / static_cast<double>(log.slots.size());
  if (have_oracle) {
    for (const auto& s : log.slots) r.normalized.push_back(normalized_reward(s.reward, *s.oracle_reward));
    r.normalized_ma = moving_average(r.normalized, 50);
  }
  return r;
}

void write_log_csv(std::ostream& out, const EpisodeLog& log, const ExitTable& exits) {
  out << "slot,device,server,exit_id,arrival_ms,t_com_ms,t_wait_ms,t_cmp_ms,t_total_ms,deadline_ms,accuracy,success,"
         "task_reward,slot_reward,loss\n";
  for (const auto& s : log.slots) {
    for (const auto& o : s.outcomes) {
      out << s.slot << ',' << o.device_id << ',' << o.server << ',' << exits[o.exit].exit_id << ','
          << format_double(o.arrival_ms) << ',' << format_double(o.t_com) << ',' << format_double(o.t_wait) << ','
          << format_double(o.t_cmp) << ',' << format_double(o.t_total) << ',' << format_double(o.deadline_ms) << ','
          << format_double(o.accuracy) << ',' << (o.success ? 1 : 0) << ',' << format_double(o.reward) << ','
          << format_double(s.reward) << ',' << (s.loss ? format_double(*s.loss) : std::string()) << '\n';
    }
  }
}

void write_metrics_header(std::ostream& out) {
  out << "scenario,policy,seed,devices,servers,slot_ms,slots,tasks,successes,ssp,avg_accuracy,avg_throughput,"
         "mean_reward,mean_qhat,final_loss\n";
}

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  const auto& r = row.report;
  std::string qhat, loss;
  if (!r.normalized.empty()) {
    double sum = 0.0;
    for (double q : r.normalized) sum += q;
    qhat = format_double(sum / static_cast<double>(r.normalized.size()));
  }
  if (!r.losses.empty()) loss = format_double(r.losses.back());
  out << row.scenario << ',' << row.policy << ',' << row.seed << ',' << row.devices << ',' << row.servers << ','
      << format_double(row.slot_ms) << ',' << r.slots << ',' << r.tasks << ',' << r.successes << ','
      << format_double(r.ssp) << ',' << format_double(r.avg_accuracy) << ',' << format_double(r.avg_throughput) << ','
      << format_double(r.mean_reward) << ',' << qhat << ',' << loss << '\n';
}

void write_qhat_csv(std::ostream& out, const EpisodeLog& log) {
  std::vector<double> q;
  for (const auto& s : log.slots) q.push_back(normalized_reward(s.reward, s.oracle_reward.value_or(0.0)));
  const auto ma = moving_average(q, 50);
  out << "slot,reward,oracle_reward,qhat,qhat_ma50\n";
  for (std::size_t i = 0; i < log.slots.size(); ++i) {
    const auto& s = log.slots[i];
    out << s.slot << ',' << format_double(s.reward) << ',' << format_double(s.oracle_reward.value_or(0.0)) << ','
        << format_double(q[i]) << ',' << format_double(ma[i]) << '\n';
  }
}

}  // namespace grle
