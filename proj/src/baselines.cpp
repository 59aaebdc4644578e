#include "grle/baselines.hpp"

#include <limits>

namespace grle {

FlatActor::FlatActor(int devices, int servers, int exits_per_server, Index hidden1, Index hidden2, std::uint64_t seed,
                     nn::AdamOptions options)
    : Actor(options),
      devices_(devices),
      servers_(servers),
      exits_(exits_per_server),
      layer1_("flat1", static_cast<Index>(devices) * servers, hidden1),
      layer2_("flat2", hidden1, hidden2),
      out_("flat_out", hidden2, static_cast<Index>(devices) * servers * exits_per_server) {
  nn::init_uniform(layer1_, seed * 3 + 0);
  nn::init_uniform(layer2_, seed * 3 + 1);
  nn::init_uniform(out_, seed * 3 + 2);
}

std::vector<nn::Parameter*> FlatActor::parameters() {
  return {&layer1_.weight, &layer1_.bias, &layer2_.weight, &layer2_.bias, &out_.weight, &out_.bias};
}

nn::Var FlatActor::forward(nn::Tape& tape, const MecGraph& graph) {
  if (graph.num_devices != devices_ || graph.num_servers != servers_ ||
      static_cast<int>(graph.exit_subset.size()) != exits_) {
    throw DimensionError("flat actor built for " + std::to_string(devices_) + " devices x " + std::to_string(servers_) +
                         " servers cannot score a graph with " + std::to_string(graph.num_devices) + " x " +
                         std::to_string(graph.num_servers));
  }
  Matrix rates = Matrix::Zero(1, static_cast<Index>(devices_) * servers_);
  std::vector<int> pick;
  pick.reserve(graph.edges.size());
  for (int e = 0; e < graph.num_edges(); ++e) {
    const GraphEdge& edge = graph.edges[e];
    rates(0, edge.src * servers_ + edge.server) = graph.edge_attrs(e, 0);
    const int local = (edge.dst - graph.num_devices) % exits_;
    pick.push_back((edge.src * servers_ + edge.server) * exits_ + local);
  }
  nn::Var x = tape.constant(std::move(rates));
  nn::Var h = nn::relu(layer2_(tape, nn::relu(layer1_(tape, x))));
  nn::Var all = nn::sigmoid(out_(tape, h));
  return nn::gather_rows(nn::transpose(all), std::move(pick));
}

std::uint64_t joint_space_size(const SlotInput& slot, int num_servers, int num_exits) {
  std::uint64_t total = 1;
  for (const Task& task : slot.tasks) {
    std::uint64_t options = 0;
    for (int n = 0; n < num_servers; ++n) options += task.reachable(n) ? static_cast<std::uint64_t>(num_exits) : 0;
    if (options != 0 && total > std::numeric_limits<std::uint64_t>::max() / options) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= options;
  }
  return total;
}

OracleResult exhaustive_oracle(const NetworkState& state, const SlotInput& slot, const ExitTable& exits,
                               const ModelParams& model, View view, std::uint64_t cap) {
  const int num_servers = static_cast<int>(state.servers.size());
  const int num_exits = exits.size();
  const std::uint64_t space = joint_space_size(slot, num_servers, num_exits);
  if (space > cap) {
    throw OracleCapExceeded("exhaustive search needs " +
                            (space == std::numeric_limits<std::uint64_t>::max() ? std::string("more than 2^64")
                                                                                 : std::to_string(space)) +
                            " joint assignments for " + std::to_string(slot.tasks.size()) +
                            " devices, above the cap of " + std::to_string(cap) +
                            "; use fewer devices or raise the oracle cap");
  }
  const SlotEvaluator eval(state, slot, exits, model, view);
  const int num_tasks = eval.num_tasks();
  std::vector<std::vector<int>> options(num_tasks);
  for (int i = 0; i < num_tasks; ++i) {
    for (int n = 0; n < num_servers; ++n) {
      if (!slot.tasks[i].reachable(n)) continue;
      for (int l = 0; l < num_exits; ++l) options[i].push_back(n * num_exits + l);
    }
    if (options[i].empty()) throw ConstraintViolation("device " + std::to_string(slot.tasks[i].device_id) + " has no reachable server");
  }

  OracleResult result;
  std::vector<std::size_t> digit(num_tasks, 0);
  std::vector<int> choice(num_tasks);
  std::vector<int> best;
  for (int i = 0; i < num_tasks; ++i) choice[i] = options[i][0];
  while (true) {
    const double reward = eval.reward(choice);
    if (result.evaluated == 0 || reward > result.reward) {
      result.reward = reward;
      best = choice;
    }
    ++result.evaluated;
    int pos = num_tasks - 1;
    for (; pos >= 0; --pos) {
      if (++digit[pos] < options[pos].size()) {
        choice[pos] = options[pos][digit[pos]];
        break;
      }
      digit[pos] = 0;
      choice[pos] = options[pos][0];
    }
    if (pos < 0) break;
  }
  result.decision = eval.decode(best);
  return result;
}

PolicyStep OraclePolicy::step(const SlotContext& ctx) {
  // The oracle is clairvoyant: it searches with the true rates and jitter.
  return {exhaustive_oracle(ctx.state, ctx.slot, ctx.exits, ctx.model, View::actual, cap_).decision, std::nullopt};
}

PolicyStep RandomPolicy::step(const SlotContext& ctx) {
  Rng rng(seed_, Stream::policy, static_cast<std::uint64_t>(ctx.slot.slot));
  PolicyStep out;
  const int num_servers = static_cast<int>(ctx.state.servers.size());
  for (const Task& task : ctx.slot.tasks) {
    std::vector<int> reachable;
    for (int n = 0; n < num_servers; ++n) {
      if (task.reachable(n)) reachable.push_back(n);
    }
    if (reachable.empty()) throw ConstraintViolation("device " + std::to_string(task.device_id) + " has no reachable server");
    const int server = reachable[rng.below(reachable.size())];
    const int exit = static_cast<int>(rng.below(static_cast<std::uint64_t>(ctx.exits.size())));
    out.decision.assignments.push_back({task.device_id, server, exit});
  }
  return out;
}

const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{"grle", "grl", "droo", "drooe", "oracle", "random"};
  return names;
}

bool is_learning_policy(const std::string& name) {
  return name == "grle" || name == "grl" || name == "droo" || name == "drooe";
}

std::unique_ptr<Policy> make_policy(const std::string& name, const ScenarioConfig& config, const ExitTable& exits) {
  const nn::AdamOptions adam{config.learning_rate};
  const std::vector<int> final_only{exits.final_exit()};
  if (name == "grle" || name == "grl") {
    const nn::ActorConfig actor{config.gcn1, config.gcn2, config.mlp_hidden};
    auto subset = name == "grle" ? all_exits(exits) : final_only;
    return std::make_unique<LearningAgent>(name, std::make_unique<GraphActor>(actor, config.seed, adam),
                                           agent_config(config, std::move(subset)));
  }
  if (name == "droo" || name == "drooe") {
    auto subset = name == "drooe" ? all_exits(exits) : final_only;
    auto actor = std::make_unique<FlatActor>(config.devices, config.servers, static_cast<int>(subset.size()),
                                             config.flat_hidden1, config.flat_hidden2, config.seed, adam);
    return std::make_unique<LearningAgent>(name, std::move(actor), agent_config(config, std::move(subset)));
  }
  if (name == "oracle") return std::make_unique<OraclePolicy>(config.oracle_cap);
  if (name == "random") return std::make_unique<RandomPolicy>(config.seed);
  std::string valid;
  for (const auto& n : policy_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown policy '" + name + "' (valid: " + valid + ")");
}

}  // namespace grle
