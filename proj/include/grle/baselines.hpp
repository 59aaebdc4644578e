#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "grle/actor_critic.hpp"

namespace grle {

// Fully connected actor over the estimated-rate vector only. Its input and
// output widths are fixed by (devices, servers, exits) at construction.
class FlatActor final : public Actor {
 public:
  FlatActor(int devices, int servers, int exits_per_server, Index hidden1, Index hidden2, std::uint64_t seed,
            nn::AdamOptions options = {});

  std::string kind() const override { return "flat"; }
  // Throws DimensionError when the graph topology differs from construction.
  nn::Var forward(nn::Tape& tape, const MecGraph& graph) override;
  std::vector<nn::Parameter*> parameters() override;
  int output_size() const { return devices_ * servers_ * exits_; }

 private:
  int devices_;
  int servers_;
  int exits_;
  nn::Dense layer1_;
  nn::Dense layer2_;
  nn::Dense out_;
};

struct OracleCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OracleResult {
  OffloadingDecision decision;
  double reward = 0.0;
  std::uint64_t evaluated = 0;
};

// Number of joint (server, exit) assignments for a slot, saturating at
// UINT64_MAX.
std::uint64_t joint_space_size(const SlotInput& slot, int num_servers, int num_exits);

// Best joint decision for this slot against the current queues, by full
// enumeration. Ties keep the first assignment in lexicographic order.
OracleResult exhaustive_oracle(const NetworkState& state, const SlotInput& slot, const ExitTable& exits,
                               const ModelParams& model, View view, std::uint64_t cap = 1'000'000);

class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(std::uint64_t cap) : cap_(cap) {}
  std::string name() const override { return "oracle"; }
  PolicyStep step(const SlotContext& ctx) override;

 private:
  std::uint64_t cap_;
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  PolicyStep step(const SlotContext& ctx) override;

 private:
  std::uint64_t seed_;
};

// grle, grl, droo, drooe, oracle, random
const std::vector<std::string>& policy_names();
bool is_learning_policy(const std::string& name);
std::unique_ptr<Policy> make_policy(const std::string& name, const ScenarioConfig& config, const ExitTable& exits);

}  // namespace grle
