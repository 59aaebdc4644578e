#include "grle/actor_critic.hpp"
#include "grle/baselines.hpp"

namespace grle {

EpisodeLog run_episode(const ScenarioConfig& config, const ExitTable& exits, Policy& policy,
                       const EpisodeOptions& options) {
  config.validate();
  const ModelParams model = config.model();
  NetworkState state = NetworkState::initial(config.devices, config.servers, exits.num_server_types());
  EpisodeLog log;
  log.policy = policy.name();
  log.slots.reserve(static_cast<std::size_t>(config.slots));
  for (int k = 1; k <= config.slots; ++k) {
    const SlotInput slot = generate_slot(config, k);
    const SlotContext ctx{state, slot, exits, model};
    SlotLog entry;
    entry.slot = k;
    if (options.with_oracle) {
      entry.oracle_reward = exhaustive_oracle(state, slot, exits, model, View::actual, config.oracle_cap).reward;
    }
    PolicyStep step = policy.step(ctx);
    SlotResult result = apply_decision(state, slot, step.decision, exits, model, View::actual);
    entry.outcomes = std::move(result.outcomes);
    entry.reward = result.reward;
    entry.loss = step.loss;
    log.slots.push_back(std::move(entry));
  }
  return log;
}

}  // namespace grle
