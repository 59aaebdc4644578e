#include "grle/actor_critic.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace grle {

std::size_t default_max_candidates(const MecGraph& graph, std::size_t cap) {
  return std::min(static_cast<std::size_t>(graph.num_edges()), cap);
}

CandidateSet quantize(std::span<const std::vector<int>> edges_by_device, const Vector& scores,
                      std::size_t max_candidates) {
  struct Swap {
    double margin;
    int device;
    int edge;
  };
  CandidateSet set;
  Candidate base;
  base.edges.reserve(edges_by_device.size());
  std::vector<Swap> swaps;
  for (std::size_t d = 0; d < edges_by_device.size(); ++d) {
    std::vector<int> ranked = edges_by_device[d];
    if (ranked.empty()) throw ConstraintViolation("quantize: device node " + std::to_string(d) + " has no edges");
    std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
      return scores(a) > scores(b) || (scores(a) == scores(b) && a < b);
    });
    const int best = ranked.front();
    base.edges.push_back(best);
    for (std::size_t j = 1; j < ranked.size(); ++j) {
      swaps.push_back({scores(best) - scores(ranked[j]), static_cast<int>(d), ranked[j]});
    }
  }
  std::sort(swaps.begin(), swaps.end(), [](const Swap& a, const Swap& b) {
    return std::tie(a.margin, a.device, a.edge) < std::tie(b.margin, b.device, b.edge);
  });
  const std::size_t limit = std::max<std::size_t>(max_candidates, 1);
  set.candidates.push_back(base);
  for (const Swap& s : swaps) {
    if (set.size() >= limit) break;
    Candidate c = base;
    c.edges[s.device] = s.edge;
    c.swapped_device = s.device;
    c.swapped_edge = s.edge;
    set.candidates.push_back(std::move(c));
  }
  return set;
}

CandidateSet quantize(const MecGraph& graph, const Vector& scores, std::size_t max_candidates) {
  if (scores.size() != graph.num_edges()) throw DimensionError("quantize: one score per edge required");
  const auto groups = graph.edges_by_device();
  return quantize(groups, scores, max_candidates);
}

CandidateSet enumerate_all(const MecGraph& graph) {
  const auto groups = graph.edges_by_device();
  CandidateSet set;
  std::vector<std::size_t> digit(groups.size(), 0);
  for (const auto& g : groups) {
    if (g.empty()) throw ConstraintViolation("enumerate_all: device without edges");
  }
  while (true) {
    Candidate c;
    for (std::size_t d = 0; d < groups.size(); ++d) c.edges.push_back(groups[d][digit[d]]);
    set.candidates.push_back(std::move(c));
    std::size_t pos = groups.size();
    while (pos > 0) {
      --pos;
      if (++digit[pos] < groups[pos].size()) break;
      digit[pos] = 0;
      if (pos == 0) return set;
    }
    if (groups.empty()) return set;
  }
}

Selection critic_select(const SlotContext& ctx, const MecGraph& graph, const CandidateSet& candidates, View view) {
  if (candidates.empty()) throw std::invalid_argument("critic_select: empty candidate set");
  const SlotEvaluator eval(ctx.state, ctx.slot, ctx.exits, ctx.model, view);
  const int num_exits = ctx.exits.size();
  std::vector<int> choice(eval.num_tasks());
  std::vector<int> best_choice;
  Selection best;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& edges = candidates.candidates[s].edges;
    if (static_cast<int>(edges.size()) != eval.num_tasks()) throw ConstraintViolation("candidate does not cover every device");
    for (int e : edges) {
      const GraphEdge& edge = graph.edges[e];
      choice[edge.task] = edge.server * num_exits + edge.exit;
    }
    const double reward = eval.reward(choice);
    if (s == 0 || reward > best.reward) {
      best.index = s;
      best.reward = reward;
      best_choice = choice;
    }
  }
  best.decision = eval.decode(best_choice);
  return best;
}

void ReplayBuffer::push(ReplayRecord record) {
  if (capacity_ == 0) return;
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(record));
}

std::vector<const ReplayRecord*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (n > records_.size()) throw std::invalid_argument("replay: sample larger than buffer");
  std::vector<std::size_t> idx(records_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<const ReplayRecord*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(&records_[idx[i]]);
  }
  return out;
}

Vector Actor::scores(const MecGraph& graph) {
  if (graph.num_edges() == 0) return Vector(0);
  nn::Tape tape;
  return forward(tape, graph).value().col(0);
}

double Actor::train_step(std::span<const ReplayRecord* const> batch) {
  if (!optimizer_) optimizer_ = std::make_unique<nn::Adam>(parameters(), options_);
  nn::Tape tape;
  std::vector<nn::BceTerm> terms;
  terms.reserve(batch.size());
  for (const ReplayRecord* r : batch) terms.push_back({forward(tape, r->graph), &r->targets});
  nn::Var loss = nn::bce_loss(terms);
  optimizer_->zero_grad();
  tape.backward(loss);
  optimizer_->step();
  return loss.value()(0, 0);
}

GraphActor::GraphActor(const nn::ActorConfig& config, std::uint64_t seed, nn::AdamOptions options)
    : Actor(options), params_(config) {
  params_.initialize(seed);
}

nn::Var GraphActor::forward(nn::Tape& tape, const MecGraph& graph) {
  return nn::graph_actor_forward(tape, params_, graph);
}

LearningAgent::LearningAgent(std::string name, std::unique_ptr<Actor> actor, AgentConfig config)
    : name_(std::move(name)),
      actor_(std::move(actor)),
      config_(std::move(config)),
      replay_(config_.replay_capacity),
      replay_rng_(config_.seed, Stream::replay) {
  if (config_.exit_subset.empty()) throw ConfigError("agent needs at least one candidate exit");
}

PolicyStep LearningAgent::step(const SlotContext& ctx) {
  const MecGraph graph = build_graph(ctx.state, ctx.slot, ctx.exits, config_.exit_subset, ctx.model);
  const Vector scores = actor_->scores(graph);
  const CandidateSet candidates = quantize(graph, scores, std::min(config_.max_candidates, default_max_candidates(graph)));
  Selection selected = critic_select(ctx, graph, candidates);
  PolicyStep out;
  if (graph.num_edges() > 0) {
    Vector targets = decision_targets(graph, selected.decision);
    out.loss = store_and_maybe_train({ctx.slot.slot, graph, std::move(targets)}, ctx.slot.slot);
  }
  out.decision = std::move(selected.decision);
  return out;
}

std::optional<double> LearningAgent::store_and_maybe_train(ReplayRecord record, int slot) {
  replay_.push(std::move(record));
  if (slot % config_.train_interval != 0 || replay_.size() < config_.batch_size) return std::nullopt;
  const auto batch = replay_.sample(config_.batch_size, replay_rng_);
  return actor_->train_step(batch);
}

AgentConfig agent_config(const ScenarioConfig& config, std::vector<int> exit_subset) {
  AgentConfig a;
  a.exit_subset = std::move(exit_subset);
  a.max_candidates = static_cast<std::size_t>(config.max_candidates);
  a.train_interval = config.train_interval;
  a.batch_size = static_cast<std::size_t>(config.batch_size);
  a.replay_capacity = static_cast<std::size_t>(config.replay_capacity);
  a.seed = config.seed;
  return a;
}

std::vector<int> all_exits(const ExitTable& exits) {
  std::vector<int> out(exits.size());
  std::iota(out.begin(), out.end(), 0);
  return out;
}

}  // namespace grle
