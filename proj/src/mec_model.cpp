#include "grle/mec_model.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace grle {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

PsiMode parse_psi_mode(const std::string& text) {
  if (text == "normalized") return PsiMode::normalized;
  if (text == "literal") return PsiMode::literal;
  throw ConfigError("unknown psi mode '" + text + "' (expected normalized or literal)");
}

std::string to_string(PsiMode mode) { return mode == PsiMode::normalized ? "normalized" : "literal"; }

// ---------------------------------------------------------------------------
// ExitTable
// ---------------------------------------------------------------------------

ExitTable::ExitTable(std::vector<std::string> server_types, std::vector<EarlyExitProfile> exits)
    : server_types_(std::move(server_types)), exits_(std::move(exits)) {
  if (server_types_.empty()) throw ConfigError("exit table needs at least one server type");
  if (exits_.empty()) throw ConfigError("exit table needs at least one exit");
  for (std::size_t l = 0; l < exits_.size(); ++l) {
    const auto& e = exits_[l];
    if (e.base_time_ms.size() != num_server_types()) {
      throw ConfigError("exit " + std::to_string(e.exit_id) + " has wrong number of timing columns");
    }
    if (!(e.accuracy >= 0.0 && e.accuracy <= 1.0)) {
      throw ConfigError("exit " + std::to_string(e.exit_id) + " accuracy outside [0,1]");
    }
    if ((e.base_time_ms.array() <= 0.0).any()) {
      throw ConfigError("exit " + std::to_string(e.exit_id) + " has non-positive inference time");
    }
    if (l > 0) {
      const auto& prev = exits_[l - 1];
      if (e.exit_id <= prev.exit_id) throw ConfigError("exit ids must be strictly increasing");
      if (e.accuracy < prev.accuracy) throw ConfigError("accuracy must be non-decreasing in exit depth");
      if ((e.base_time_ms.array() <= prev.base_time_ms.array()).any()) {
        throw ConfigError("inference time must be strictly increasing in exit depth");
      }
    }
  }
}

ExitTable ExitTable::vgg16_default() {
  auto row = [](int id, double acc, double rtx, double gtx) {
    EarlyExitProfile p;
    p.exit_id = id;
    p.accuracy = acc;
    p.base_time_ms = Vector(2);
    p.base_time_ms << rtx, gtx;
    return p;
  };
  return ExitTable({"RTX_2080TI", "GTX_1080TI"},
                   {row(1, 0.8, 0.36, 0.73), row(3, 0.85, 0.46, 0.89), row(4, 0.885, 0.54, 1.06),
                    row(7, 0.905, 0.71, 1.4), row(17, 0.935, 1.26, 2.42)});
}

double ExitTable::max_accuracy() const {
  double best = 0.0;
  for (const auto& e : exits_) best = std::max(best, e.accuracy);
  return best;
}

ExitTable parse_exit_table(std::istream& in) {
  std::vector<std::string> types;
  std::vector<EarlyExitProfile> exits;
  std::string line;
  bool have_header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (!have_header) {
      if (tokens.size() < 3 || tokens[0] != "exit_id" || tokens[1] != "accuracy") {
        throw ConfigError("exit table header must be 'exit_id accuracy <server types...>'");
      }
      types.assign(tokens.begin() + 2, tokens.end());
      have_header = true;
      continue;
    }
    if (tokens.size() != types.size() + 2) {
      throw ConfigError("exit table line " + std::to_string(line_no) + ": expected " +
                        std::to_string(types.size() + 2) + " columns");
    }
    try {
      EarlyExitProfile p;
      p.exit_id = std::stoi(tokens[0]);
      p.accuracy = std::stod(tokens[1]);
      p.base_time_ms = Vector(static_cast<Index>(types.size()));
      for (std::size_t t = 0; t < types.size(); ++t) p.base_time_ms(static_cast<Index>(t)) = std::stod(tokens[t + 2]);
      exits.push_back(std::move(p));
    } catch (const std::logic_error&) {
      throw ConfigError("exit table line " + std::to_string(line_no) + ": malformed number");
    }
  }
  if (!have_header) throw ConfigError("exit table is empty");
  return ExitTable(std::move(types), std::move(exits));
}

ExitTable load_exit_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open exit table '" + path + "'");
  return parse_exit_table(in);
}

void write_exit_table(std::ostream& out, const ExitTable& table) {
  out << "exit_id accuracy";
  for (const auto& t : table.server_types()) out << ' ' << t;
  out << '\n';
  for (const auto& e : table.exits()) {
    out << e.exit_id << ' ' << format_double(e.accuracy);
    for (Index t = 0; t < e.base_time_ms.size(); ++t) out << ' ' << format_double(e.base_time_ms(t));
    out << '\n';
  }
}

NetworkState NetworkState::initial(int num_devices, int num_servers, int num_server_types) {
  NetworkState s;
  s.devices.resize(num_devices);
  for (int m = 0; m < num_devices; ++m) s.devices[m].device_id = m;
  s.servers.resize(num_servers);
  for (int n = 0; n < num_servers; ++n) {
    s.servers[n].server_id = n;
    s.servers[n].type = n % num_server_types;
  }
  return s;
}

// ---------------------------------------------------------------------------
// SlotEvaluator
// ---------------------------------------------------------------------------

SlotEvaluator::SlotEvaluator(const NetworkState& state, const SlotInput& slot, const ExitTable& exits,
                             const ModelParams& params, View view)
    : state_(&state),
      slot_(&slot),
      exits_(&exits),
      params_(params),
      num_tasks_(static_cast<int>(slot.tasks.size())),
      num_servers_(static_cast<int>(state.servers.size())),
      num_exits_(exits.size()) {
  t_com_.resize(num_tasks_, num_servers_);
  arrival_.resize(num_tasks_, num_servers_);
  t_cmp_.resize(num_tasks_, num_servers_ * num_exits_);
  const auto& capacity = view == View::actual ? slot.capacity_fraction : slot.capacity_est;
  for (int i = 0; i < num_tasks_; ++i) {
    const Task& task = slot.tasks[i];
    if (task.device_id < 0 || task.device_id >= static_cast<int>(state.devices.size())) {
      throw DimensionError("task references unknown device " + std::to_string(task.device_id));
    }
    if (task.num_servers() != num_servers_) throw DimensionError("task rate vector does not match server count");
    const double last = state.devices[task.device_id].last_arrival_ms;
    // Policies do not know the per-task inference jitter.
    const double jitter = view == View::actual && !slot.jitter.empty() ? slot.jitter[i] : 1.0;
    for (int n = 0; n < num_servers_; ++n) {
      const double rate = view == View::actual ? task.true_rate_mbps[n] : task.est_rate_mbps[n];
      t_com_(i, n) = transmission_time(task.size_kbytes, rate);
      arrival_(i, n) = arrival_time(last, task.slot, params_.slot_len_ms, t_com_(i, n));
      const int type = state.servers[n].type;
      for (int l = 0; l < num_exits_; ++l) {
        t_cmp_(i, n * num_exits_ + l) = computation_time(exits.base_time(l, type), jitter, capacity[n]);
      }
    }
  }
}

template <typename Visit>
void SlotEvaluator::simulate(std::span<const int> choice, Visit&& visit) const {
  thread_local std::vector<int> order;
  for (int n = 0; n < num_servers_; ++n) {
    order.clear();
    for (int i = 0; i < num_tasks_; ++i) {
      if (choice[i] / num_exits_ == n) order.push_back(i);
    }
    if (order.empty()) continue;
    // Insertion sort by (arrival, device id); queues per slot are short.
    for (std::size_t a = 1; a < order.size(); ++a) {
      const int key = order[a];
      std::size_t b = a;
      auto before = [&](int x, int y) {
        const double ax = arrival_(x, n), ay = arrival_(y, n);
        return ax < ay || (ax == ay && slot_->tasks[x].device_id < slot_->tasks[y].device_id);
      };
      while (b > 0 && before(key, order[b - 1])) {
        order[b] = order[b - 1];
        --b;
      }
      order[b] = key;
    }
    double free_at = state_->servers[n].free_at_ms;
    for (int i : order) {
      const int l = choice[i] % num_exits_;
      const double arrival = arrival_(i, n);
      const double wait = waiting_time(free_at, arrival);
      const double cmp = t_cmp_(i, n * num_exits_ + l);
      free_at = arrival + wait + cmp;
      visit(i, n, l, arrival, wait, cmp);
    }
  }
}

double SlotEvaluator::reward(std::span<const int> choice) const {
  // Accumulate in task order so the sum matches slot_reward over outcomes.
  thread_local std::vector<double> terms;
  terms.assign(num_tasks_, 0.0);
  simulate(choice, [&](int i, int n, int l, double, double wait, double cmp) {
    const double total = t_com_(i, n) + wait + cmp;
    terms[i] = (*exits_)[l].accuracy * psi(total, slot_->tasks[i].deadline_ms, params_.psi_mode);
  });
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum;
}

SlotResult SlotEvaluator::evaluate(std::span<const int> choice) const {
  SlotResult result;
  result.outcomes.resize(num_tasks_);
  simulate(choice, [&](int i, int n, int l, double arrival, double wait, double cmp) {
    SlotOutcome& o = result.outcomes[i];
    const Task& task = slot_->tasks[i];
    o.device_id = task.device_id;
    o.server = n;
    o.exit = l;
    o.arrival_ms = arrival;
    o.t_com = t_com_(i, n);
    o.t_wait = wait;
    o.t_cmp = cmp;
    o.t_total = o.t_com + o.t_wait + o.t_cmp;
    o.deadline_ms = task.deadline_ms;
    o.accuracy = (*exits_)[l].accuracy;
    o.reward = o.accuracy * psi(o.t_total, task.deadline_ms, params_.psi_mode);
    o.success = o.t_total <= task.deadline_ms;
  });
  result.reward = slot_reward(result.outcomes);
  return result;
}

std::vector<int> SlotEvaluator::encode(const OffloadingDecision& decision) const {
  if (static_cast<int>(decision.assignments.size()) != num_tasks_) {
    throw ConstraintViolation("decision covers " + std::to_string(decision.assignments.size()) +
                              " devices but the slot has " + std::to_string(num_tasks_) + " tasks");
  }
  std::vector<int> choice(num_tasks_, -1);
  for (const Assignment& a : decision.assignments) {
    int task = -1;
    for (int i = 0; i < num_tasks_; ++i) {
      if (slot_->tasks[i].device_id == a.device_id) {
        task = i;
        break;
      }
    }
    if (task < 0) throw ConstraintViolation("decision assigns unknown device " + std::to_string(a.device_id));
    if (choice[task] >= 0) throw ConstraintViolation("device " + std::to_string(a.device_id) + " assigned twice");
    if (a.server < 0 || a.server >= num_servers_) {
      throw ConstraintViolation("device " + std::to_string(a.device_id) + " assigned to invalid server");
    }
    if (a.exit < 0 || a.exit >= num_exits_) {
      throw ConstraintViolation("device " + std::to_string(a.device_id) + " assigned to invalid exit");
    }
    if (!slot_->tasks[task].reachable(a.server)) {
      throw ConstraintViolation("device " + std::to_string(a.device_id) + " has no link to server " +
                                std::to_string(a.server));
    }
    choice[task] = a.server * num_exits_ + a.exit;
  }
  return choice;
}

OffloadingDecision SlotEvaluator::decode(std::span<const int> choice) const {
  OffloadingDecision d;
  d.assignments.reserve(choice.size());
  for (int i = 0; i < num_tasks_; ++i) {
    d.assignments.push_back({slot_->tasks[i].device_id, choice[i] / num_exits_, choice[i] % num_exits_});
  }
  return d;
}

double slot_reward(std::span<const SlotOutcome> outcomes) {
  double sum = 0.0;
  for (const auto& o : outcomes) sum += o.reward;
  return sum;
}

SlotResult apply_decision(NetworkState& state, const SlotInput& slot, const OffloadingDecision& decision,
                          const ExitTable& exits, const ModelParams& params, View view) {
  SlotEvaluator eval(state, slot, exits, params, view);
  const auto choice = eval.encode(decision);
  SlotResult result = eval.evaluate(choice);
  for (const SlotOutcome& o : result.outcomes) {
    state.devices[o.device_id].last_arrival_ms = o.arrival_ms;
    auto& server = state.servers[o.server];
    server.free_at_ms = std::max(server.free_at_ms, o.arrival_ms + o.t_wait + o.t_cmp);
  }
  return result;
}

double evaluate_decision(const NetworkState& state, const SlotInput& slot, const OffloadingDecision& decision,
                         const ExitTable& exits, const ModelParams& params, View view) {
  NetworkState copy = state;
  return apply_decision(copy, slot, decision, exits, params, view).reward;
}

}  // namespace grle
