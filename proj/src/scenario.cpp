#include "grle/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>

#include "grle/random.hpp"

namespace grle {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_same_v<T, double>) {
      value = std::stod(text, &used);
    } else if constexpr (std::is_same_v<T, int>) {
      value = std::stoi(text, &used);
    } else {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      value = static_cast<T>(std::stoull(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::logic_error&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
}

struct Field {
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <typename T>
Field number_field(T ScenarioConfig::*member, const std::string& key) {
  return {[member, key](ScenarioConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
          [member](const ScenarioConfig& c) {
            if constexpr (std::is_same_v<T, double>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

// Ordered so that write_config emits a stable, documented layout.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    t.emplace_back("name", Field{[](ScenarioConfig& c, const std::string& v) { c.name = v; },
                                 [](const ScenarioConfig& c) { return c.name; }});
    t.emplace_back("devices", number_field(&ScenarioConfig::devices, "devices"));
    t.emplace_back("servers", number_field(&ScenarioConfig::servers, "servers"));
    t.emplace_back("slots", number_field(&ScenarioConfig::slots, "slots"));
    t.emplace_back("slot_ms", number_field(&ScenarioConfig::slot_ms, "slot_ms"));
    t.emplace_back("deadline_ms", number_field(&ScenarioConfig::deadline_ms, "deadline_ms"));
    t.emplace_back("size_min_kb", number_field(&ScenarioConfig::size_min_kb, "size_min_kb"));
    t.emplace_back("size_max_kb", number_field(&ScenarioConfig::size_max_kb, "size_max_kb"));
    t.emplace_back("rate_min_mbps", number_field(&ScenarioConfig::rate_min_mbps, "rate_min_mbps"));
    t.emplace_back("rate_max_mbps", number_field(&ScenarioConfig::rate_max_mbps, "rate_max_mbps"));
    t.emplace_back("capacity_mode",
                   Field{[](ScenarioConfig& c, const std::string& v) {
                           if (v == "fixed") {
                             c.capacity_mode = CapacityMode::fixed;
                           } else if (v == "uniform") {
                             c.capacity_mode = CapacityMode::uniform;
                           } else {
                             throw ConfigError("capacity_mode must be 'fixed' or 'uniform', got '" + v + "'");
                           }
                         },
                         [](const ScenarioConfig& c) {
                           return std::string(c.capacity_mode == CapacityMode::fixed ? "fixed" : "uniform");
                         }});
    t.emplace_back("capacity_min", number_field(&ScenarioConfig::capacity_min, "capacity_min"));
    t.emplace_back("inference_jitter", number_field(&ScenarioConfig::inference_jitter, "inference_jitter"));
    t.emplace_back("csi_error", number_field(&ScenarioConfig::csi_error, "csi_error"));
    t.emplace_back("link_drop", number_field(&ScenarioConfig::link_drop, "link_drop"));
    t.emplace_back("psi_mode", Field{[](ScenarioConfig& c, const std::string& v) { c.psi_mode = parse_psi_mode(v); },
                                     [](const ScenarioConfig& c) { return to_string(c.psi_mode); }});
    t.emplace_back("exit_table", Field{[](ScenarioConfig& c, const std::string& v) { c.exit_table = v; },
                                       [](const ScenarioConfig& c) { return c.exit_table; }});
    t.emplace_back("seed", number_field(&ScenarioConfig::seed, "seed"));
    t.emplace_back("oracle_cap", number_field(&ScenarioConfig::oracle_cap, "oracle_cap"));
    t.emplace_back("train_interval", number_field(&ScenarioConfig::train_interval, "train_interval"));
    t.emplace_back("batch_size", number_field(&ScenarioConfig::batch_size, "batch_size"));
    t.emplace_back("replay_capacity", number_field(&ScenarioConfig::replay_capacity, "replay_capacity"));
    t.emplace_back("max_candidates", number_field(&ScenarioConfig::max_candidates, "max_candidates"));
    t.emplace_back("learning_rate", number_field(&ScenarioConfig::learning_rate, "learning_rate"));
    t.emplace_back("gcn1", number_field(&ScenarioConfig::gcn1, "gcn1"));
    t.emplace_back("gcn2", number_field(&ScenarioConfig::gcn2, "gcn2"));
    t.emplace_back("mlp_hidden", number_field(&ScenarioConfig::mlp_hidden, "mlp_hidden"));
    t.emplace_back("flat_hidden1", number_field(&ScenarioConfig::flat_hidden1, "flat_hidden1"));
    t.emplace_back("flat_hidden2", number_field(&ScenarioConfig::flat_hidden2, "flat_hidden2"));
    return t;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return &f;
  }
  return nullptr;
}

}  // namespace

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(devices >= 0, "devices must be >= 0");
  require(servers >= 1, "servers must be >= 1");
  require(slots >= 0, "slots must be >= 0");
  require(slot_ms > 0.0, "slot_ms must be > 0");
  require(deadline_ms > 0.0, "deadline_ms must be > 0");
  require(size_min_kb > 0.0 && size_max_kb >= size_min_kb, "size range must satisfy 0 < min <= max");
  require(rate_min_mbps > 0.0 && rate_max_mbps >= rate_min_mbps, "rate range must satisfy 0 < min <= max");
  require(capacity_min > 0.0 && capacity_min <= 1.0, "capacity_min must be in (0, 1]");
  require(inference_jitter >= 0.0 && inference_jitter < 1.0, "inference_jitter must be in [0, 1)");
  require(csi_error >= 0.0 && csi_error < 1.0, "csi_error must be in [0, 1)");
  require(link_drop >= 0.0 && link_drop < 1.0, "link_drop must be in [0, 1)");
  require(train_interval >= 1, "train_interval must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(replay_capacity >= batch_size, "replay_capacity must be >= batch_size");
  require(max_candidates >= 1, "max_candidates must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(gcn1 >= 1 && gcn2 >= 1 && mlp_hidden >= 1 && flat_hidden1 >= 1 && flat_hidden2 >= 1,
          "layer widths must be >= 1");
}

void set_config_value(ScenarioConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError("unknown config key '" + key + "'");
  f->set(config, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

ScenarioConfig parse_config(std::istream& in, ScenarioConfig config) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

ScenarioConfig load_config(const std::string& path, ScenarioConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in, std::move(base));
}

void write_config(std::ostream& out, const ScenarioConfig& config) {
  for (const auto& [key, f] : fields()) out << key << " = " << f.get(config) << '\n';
}

void apply_env_overrides(ScenarioConfig& config) {
  for (const auto& [key, f] : fields()) {
    std::string var = kEnvPrefix;
    for (char ch : key) var += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (const char* value = std::getenv(var.c_str())) f.set(config, value);
  }
  config.validate();
}

ExitTable load_exits(const ScenarioConfig& config) {
  return config.exit_table.empty() ? ExitTable::vgg16_default() : load_exit_table(config.exit_table);
}

SlotInput generate_slot(const ScenarioConfig& c, int k) {
  SlotInput slot;
  slot.slot = k;
  const auto index = static_cast<std::uint64_t>(k);
  Rng device_rng(c.seed, Stream::device, index);
  Rng csi_rng(c.seed, Stream::csi, index);
  Rng jitter_rng(c.seed, Stream::jitter, index);
  Rng server_rng(c.seed, Stream::server, index);
  Rng topology_rng(c.seed, Stream::topology, index);

  slot.tasks.reserve(c.devices);
  for (int m = 0; m < c.devices; ++m) {
    Task task;
    task.device_id = m;
    task.slot = k;
    task.size_kbytes = device_rng.uniform(c.size_min_kb, c.size_max_kb);
    task.deadline_ms = c.deadline_ms;
    task.est_rate_mbps.resize(c.servers);
    task.true_rate_mbps.resize(c.servers);
    for (int n = 0; n < c.servers; ++n) {
      task.est_rate_mbps[n] = device_rng.uniform(c.rate_min_mbps, c.rate_max_mbps);
      task.true_rate_mbps[n] = task.est_rate_mbps[n];
      if (c.csi_error > 0.0) task.true_rate_mbps[n] *= csi_rng.uniform(1.0 - c.csi_error, 1.0 + c.csi_error);
    }
    if (c.link_drop > 0.0) {
      task.linked.assign(c.servers, true);
      bool any = false;
      for (int n = 0; n < c.servers; ++n) {
        task.linked[n] = topology_rng.uniform() >= c.link_drop;
        any = any || task.linked[n];
      }
      if (!any) task.linked[topology_rng.below(static_cast<std::uint64_t>(c.servers))] = true;
    }
    slot.jitter.push_back(c.inference_jitter > 0.0 ? jitter_rng.uniform(1.0 - c.inference_jitter, 1.0 + c.inference_jitter)
                                                   : 1.0);
    slot.tasks.push_back(std::move(task));
  }
  slot.capacity_fraction.resize(c.servers, 1.0);
  if (c.capacity_mode == CapacityMode::uniform) {
    for (auto& cap : slot.capacity_fraction) cap = server_rng.uniform(c.capacity_min, 1.0);
  }
  // Available capacity is observable at the start of a slot.
  slot.capacity_est = slot.capacity_fraction;
  return slot;
}

}  // namespace grle
