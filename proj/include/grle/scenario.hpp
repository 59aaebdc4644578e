#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "grle/mec_model.hpp"

namespace grle {

enum class CapacityMode { fixed, uniform };

// One experiment regime. Every field has a key in the flat config format.
struct ScenarioConfig {
  std::string name = "default";
  int devices = 4;
  int servers = 2;
  int slots = 1000;
  double slot_ms = 30.0;
  double deadline_ms = 30.0;
  double size_min_kb = 50.0;
  double size_max_kb = 100.0;
  double rate_min_mbps = 20.0;
  double rate_max_mbps = 100.0;
  CapacityMode capacity_mode = CapacityMode::fixed;
  double capacity_min = 0.25;
  double inference_jitter = 0.0;  // half-width, 0.25 means +-25 %
  double csi_error = 0.0;         // half-width, 0.2 means +-20 %
  double link_drop = 0.0;         // per (device, server) per slot
  PsiMode psi_mode = PsiMode::normalized;
  std::string exit_table;         // empty: built-in VGG-16 table
  std::uint64_t seed = 1;
  std::uint64_t oracle_cap = 1'000'000;

  int train_interval = 10;
  int batch_size = 64;
  int replay_capacity = 128;
  int max_candidates = 64;
  double learning_rate = 1e-3;
  int gcn1 = 128;
  int gcn2 = 64;
  int mlp_hidden = 64;
  int flat_hidden1 = 128;
  int flat_hidden2 = 64;

  ModelParams model() const { return {slot_ms, psi_mode}; }
  void validate() const;
};

// Sets one key from its text form. Throws ConfigError for unknown keys or
// malformed values.
void set_config_value(ScenarioConfig& config, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

// `key = value` lines; '#' starts a comment.
ScenarioConfig parse_config(std::istream& in, ScenarioConfig base = {});
ScenarioConfig load_config(const std::string& path, ScenarioConfig base = {});
void write_config(std::ostream& out, const ScenarioConfig& config);

// Environment overrides: GRLE_<KEY> with the key upper-cased, e.g.
// GRLE_DEVICES=6 or GRLE_CSI_ERROR=0.2.
inline constexpr const char* kEnvPrefix = "GRLE_";
void apply_env_overrides(ScenarioConfig& config);

ExitTable load_exits(const ScenarioConfig& config);

// Draws slot k (1-based). Pure in (config, k): sizes and rates come from the
// device substream, capacities from the server substream, jitter and CSI
// error from their own substreams.
SlotInput generate_slot(const ScenarioConfig& config, int k);

}  // namespace grle
