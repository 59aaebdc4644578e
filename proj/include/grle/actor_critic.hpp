#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grle/graph_state.hpp"
#include "grle/nn/layers.hpp"
#include "grle/nn/optim.hpp"
#include "grle/policy.hpp"
#include "grle/random.hpp"
#include "grle/scenario.hpp"

namespace grle {

// ---------------------------------------------------------------------------
// Order-preserving quantization
// ---------------------------------------------------------------------------

struct Candidate {
  std::vector<int> edges;   // chosen edge per device node
  int swapped_device = -1;  // -1 for the per-device argmax candidate
  int swapped_edge = -1;
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  std::size_t size() const { return candidates.size(); }
  bool empty() const { return candidates.empty(); }
};

// min(|E|, cap)
std::size_t default_max_candidates(const MecGraph& graph, std::size_t cap = 64);

// Candidate 0 takes every device's best-scoring edge. Each further candidate
// replaces one device's edge by a lower-ranked alternative, in ascending order
// of the score margin to that device's best edge; ties go to the lower device
// and then the lower edge index.
CandidateSet quantize(std::span<const std::vector<int>> edges_by_device, const Vector& scores,
                      std::size_t max_candidates);
CandidateSet quantize(const MecGraph& graph, const Vector& scores, std::size_t max_candidates);

// Every joint assignment, device 0 varying slowest.
CandidateSet enumerate_all(const MecGraph& graph);

struct Selection {
  std::size_t index = 0;
  OffloadingDecision decision;
  double reward = 0.0;
};

// Scores every candidate against a hypothetical copy of the queues and returns
// the best; ties go to the lowest index.
Selection critic_select(const SlotContext& ctx, const MecGraph& graph, const CandidateSet& candidates,
                        View view = View::estimated);

// ---------------------------------------------------------------------------
// Experience replay
// ---------------------------------------------------------------------------

struct ReplayRecord {
  int slot = 0;
  MecGraph graph;
  Vector targets;  // per-edge 0/1 encoding of the selected decision
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 128) : capacity_(capacity) {}

  void push(ReplayRecord record);
  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  const ReplayRecord& operator[](std::size_t i) const { return records_[i]; }
  // Uniform sample of n distinct records.
  std::vector<const ReplayRecord*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<ReplayRecord> records_;
};

// ---------------------------------------------------------------------------
// Actors
// ---------------------------------------------------------------------------

// Maps a graph to per-edge relaxed scores; trained by BCE against replayed
// decisions. Subclasses differ only in the forward pass.
class Actor {
 public:
  explicit Actor(nn::AdamOptions options) : options_(options) {}
  virtual ~Actor() = default;
  Actor(const Actor&) = delete;
  Actor& operator=(const Actor&) = delete;

  virtual std::string kind() const = 0;
  virtual nn::Var forward(nn::Tape& tape, const MecGraph& graph) = 0;
  virtual std::vector<nn::Parameter*> parameters() = 0;

  Vector scores(const MecGraph& graph);
  // One Adam step on the mean BCE of the batch; returns the pre-update loss.
  double train_step(std::span<const ReplayRecord* const> batch);
  long updates() const { return optimizer_ ? optimizer_->steps() : 0; }

 private:
  nn::AdamOptions options_;
  std::unique_ptr<nn::Adam> optimizer_;
};

class GraphActor final : public Actor {
 public:
  GraphActor(const nn::ActorConfig& config, std::uint64_t seed, nn::AdamOptions options = {});

  std::string kind() const override { return "graph"; }
  nn::Var forward(nn::Tape& tape, const MecGraph& graph) override;
  std::vector<nn::Parameter*> parameters() override { return params_.parameters(); }
  nn::ActorParams& params() { return params_; }

 private:
  nn::ActorParams params_;
};

// ---------------------------------------------------------------------------
// The learning agent: actor -> quantize -> critic -> replay -> train.
// ---------------------------------------------------------------------------

struct AgentConfig {
  std::vector<int> exit_subset;  // full-table exit indices this agent may use
  std::size_t max_candidates = 64;
  int train_interval = 10;
  std::size_t batch_size = 64;
  std::size_t replay_capacity = 128;
  std::uint64_t seed = 1;
};

class LearningAgent final : public Policy {
 public:
  LearningAgent(std::string name, std::unique_ptr<Actor> actor, AgentConfig config);

  std::string name() const override { return name_; }
  PolicyStep step(const SlotContext& ctx) override;

  // Appends the record; every train_interval slots, once the buffer holds a
  // full batch, samples one and takes a training step.
  std::optional<double> store_and_maybe_train(ReplayRecord record, int slot);

  Actor& actor() { return *actor_; }
  const ReplayBuffer& replay() const { return replay_; }
  const AgentConfig& config() const { return config_; }

 private:
  std::string name_;
  std::unique_ptr<Actor> actor_;
  AgentConfig config_;
  ReplayBuffer replay_;
  Rng replay_rng_;
};

AgentConfig agent_config(const ScenarioConfig& config, std::vector<int> exit_subset);
std::vector<int> all_exits(const ExitTable& exits);

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

struct SlotLog {
  int slot = 0;
  std::vector<SlotOutcome> outcomes;
  double reward = 0.0;
  std::optional<double> loss;
  std::optional<double> oracle_reward;
};

struct EpisodeLog {
  std::string policy;
  std::vector<SlotLog> slots;
};

struct EpisodeOptions {
  bool with_oracle = false;  // record the per-slot exhaustive-search reward
};

// Runs config.slots slots. Each slot: draw inputs, let the policy decide on
// the current queues, commit the decision with true rates and capacities.
EpisodeLog run_episode(const ScenarioConfig& config, const ExitTable& exits, Policy& policy,
                       const EpisodeOptions& options = {});

}  // namespace grle
