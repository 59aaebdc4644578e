// Command-line driver: single episodes, sweeps over device counts, and
// comparisons against per-slot exhaustive search.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "grle/baselines.hpp"
#include "grle/metrics.hpp"
#include "grle/plot.hpp"

namespace fs = std::filesystem;
using namespace grle;

namespace {

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kInternalError = 2;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> slots;
  std::string out = "out";
  std::optional<std::uint64_t> oracle_cap;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Scenario config file (key = value lines)");
  cmd->add_option("--seed", o.seed, "Random seed (overrides config)");
  cmd->add_option("--slots", o.slots, "Number of slots K (overrides config)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--oracle-cap", o.oracle_cap, "Maximum joint assignments for exhaustive search");
}

// Precedence: defaults < config file < GRLE_* environment < flags.
ScenarioConfig resolve_config(const CommonOptions& o) {
  ScenarioConfig config = o.config_path.empty() ? ScenarioConfig{} : load_config(o.config_path);
  apply_env_overrides(config);
  if (o.seed) config.seed = *o.seed;
  if (o.slots) config.slots = *o.slots;
  if (o.oracle_cap) config.oracle_cap = *o.oracle_cap;
  config.validate();
  return config;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct CellResult {
  MetricsRow row;
  std::vector<double> reward_ma;
  std::string error;
};

CellResult run_cell(const ScenarioConfig& config, const ExitTable& exits, const std::string& policy_name,
                    const fs::path& dir, bool with_oracle) {
  CellResult cell;
  auto policy = make_policy(policy_name, config, exits);
  const EpisodeLog log = run_episode(config, exits, *policy, {with_oracle});
  cell.row = {config.name, policy_name, config.seed, config.devices, config.servers, config.slot_ms,
              summarize(log, config.slot_ms)};
  std::vector<double> rewards;
  for (const auto& s : log.slots) rewards.push_back(s.reward);
  cell.reward_ma = moving_average(rewards, 50);

  fs::create_directories(dir);
  std::ostringstream log_csv, metrics_csv;
  write_log_csv(log_csv, log, exits);
  write_metrics_header(metrics_csv);
  write_metrics_row(metrics_csv, cell.row);
  write_file(dir / "log.csv", log_csv.str());
  write_file(dir / "metrics.csv", metrics_csv.str());
  if (with_oracle) {
    std::ostringstream qhat;
    write_qhat_csv(qhat, log);
    write_file(dir / "qhat.csv", qhat.str());
  }
  if (auto* agent = dynamic_cast<LearningAgent*>(policy.get())) {
    const auto params = agent->actor().parameters();
    nn::save_checkpoint((dir / "checkpoint.txt").string(), params);
  }
  return cell;
}

std::string summary_line(const MetricsRow& row) {
  std::ostringstream s;
  s << row.policy << " M=" << row.devices << " seed=" << row.seed << " slots=" << row.report.slots
    << " ssp=" << row.report.ssp << " accuracy=" << row.report.avg_accuracy
    << " throughput=" << row.report.avg_throughput << "/ms mean_reward=" << row.report.mean_reward;
  if (!row.report.normalized.empty()) {
    double sum = 0.0;
    for (double q : row.report.normalized) sum += q;
    s << " mean_qhat=" << sum / static_cast<double>(row.report.normalized.size());
  }
  return s.str();
}

int cmd_run(const CommonOptions& o, const std::string& policy_name) {
  const ScenarioConfig config = resolve_config(o);
  const ExitTable exits = load_exits(config);
  const CellResult cell = run_cell(config, exits, policy_name, o.out, false);
  std::cout << summary_line(cell.row) << '\n';
  return kOk;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T value;
    if (!(is >> value) || !is.eof()) throw ConfigError("bad " + what + " list entry '" + item + "'");
    out.push_back(value);
  }
  if (out.empty()) throw ConfigError(what + " list is empty");
  return out;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("policy list is empty");
  return out;
}

int cmd_sweep(const CommonOptions& o, const std::string& policies_text, const std::string& devices_text,
              const std::string& seeds_text, unsigned jobs) {
  const ScenarioConfig base = resolve_config(o);
  const ExitTable exits = load_exits(base);
  const auto policies = split_names(policies_text);
  for (const auto& p : policies) {
    if (std::find(policy_names().begin(), policy_names().end(), p) == policy_names().end()) {
      make_policy(p, base, exits);  // throws with the list of valid names
    }
  }
  const auto device_counts = parse_list<int>(devices_text, "devices");
  const auto seeds = parse_list<std::uint64_t>(seeds_text, "seeds");

  struct Cell {
    ScenarioConfig config;
    std::string policy;
    fs::path dir;
  };
  std::vector<Cell> cells;
  for (const auto& p : policies) {
    for (int m : device_counts) {
      for (auto seed : seeds) {
        ScenarioConfig c = base;
        c.devices = m;
        c.seed = seed;
        cells.push_back({c, p, fs::path(o.out) / "cells" / (p + "_M" + std::to_string(m) + "_s" + std::to_string(seed))});
      }
    }
  }

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        cells[i].config.validate();
        results[i] = run_cell(cells[i].config, exits, cells[i].policy, cells[i].dir, false);
      } catch (const std::exception& e) {
        results[i].error = e.what();
        results[i].row = {cells[i].config.name, cells[i].policy, cells[i].config.seed, cells[i].config.devices,
                          cells[i].config.servers, cells[i].config.slot_ms, {}};
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cells.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  fs::create_directories(o.out);
  std::ostringstream aggregate;
  write_metrics_header(aggregate);
  std::size_t failed = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!results[i].error.empty()) {
      ++failed;
      std::cerr << "cell " << cells[i].dir.filename().string() << " failed: " << results[i].error << '\n';
      continue;
    }
    write_metrics_row(aggregate, results[i].row);
  }
  write_file(fs::path(o.out) / "aggregate.csv", aggregate.str());

  // Seed means per (policy, M), in sweep order.
  std::ostringstream summary;
  summary << "policy,devices,runs,ssp,avg_accuracy,avg_throughput,mean_reward\n";
  std::map<std::string, Series> acc, ssp_s, thr;
  for (const auto& p : policies) {
    for (int m : device_counts) {
      double s = 0, a = 0, t = 0, r = 0;
      int n = 0;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].policy != p || cells[i].config.devices != m || !results[i].error.empty()) continue;
        const auto& rep = results[i].row.report;
        s += rep.ssp, a += rep.avg_accuracy, t += rep.avg_throughput, r += rep.mean_reward;
        ++n;
      }
      if (n == 0) continue;
      summary << p << ',' << m << ',' << n << ',' << format_double(s / n) << ',' << format_double(a / n) << ','
              << format_double(t / n) << ',' << format_double(r / n) << '\n';
      for (auto* series : {&acc, &ssp_s, &thr}) (*series)[p].label = p;
      acc[p].x.push_back(m), acc[p].y.push_back(a / n);
      ssp_s[p].x.push_back(m), ssp_s[p].y.push_back(s / n);
      thr[p].x.push_back(m), thr[p].y.push_back(t / n);
    }
  }
  write_file(fs::path(o.out) / "summary.csv", summary.str());

  auto plot = [&](const std::string& file, const std::string& title, const std::string& y_label,
                  const std::map<std::string, Series>& data) {
    std::vector<Series> ordered;
    for (const auto& p : policies) {
      if (auto it = data.find(p); it != data.end()) ordered.push_back(it->second);
    }
    std::ostringstream svg;
    write_line_plot(svg, title, "IoT devices M", y_label, ordered);
    write_file(fs::path(o.out) / file, svg.str());
  };
  plot("accuracy_vs_devices.svg", "Average accuracy", "accuracy", acc);
  plot("ssp_vs_devices.svg", "Service success probability", "SSP", ssp_s);
  plot("throughput_vs_devices.svg", "Average throughput", "tasks / ms", thr);

  // Reward moving average of the first seed at the largest M.
  std::vector<Series> curves;
  const int largest = *std::max_element(device_counts.begin(), device_counts.end());
  for (const auto& p : policies) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].policy == p && cells[i].config.devices == largest && cells[i].config.seed == seeds.front() &&
          results[i].error.empty()) {
        Series s{p, {}, results[i].reward_ma};
        for (std::size_t k = 0; k < s.y.size(); ++k) s.x.push_back(static_cast<double>(k + 1));
        curves.push_back(std::move(s));
      }
    }
  }
  std::ostringstream svg;
  write_line_plot(svg, "Slot reward, moving average (50)", "slot", "reward", curves);
  write_file(fs::path(o.out) / "reward_ma.svg", svg.str());

  std::cout << "sweep: " << cells.size() - failed << " of " << cells.size() << " cells completed\n";
  return failed == 0 ? kOk : kUserError;
}

int cmd_oracle_compare(const CommonOptions& o, const std::string& policy_name) {
  const ScenarioConfig config = resolve_config(o);
  const ExitTable exits = load_exits(config);
  // Check the worst slot up front rather than failing mid-run.
  const double space = std::pow(static_cast<double>(config.servers) * exits.size(), config.devices);
  if (space > static_cast<double>(config.oracle_cap)) {
    std::cerr << "error: exhaustive search over (" << config.servers << " servers x " << exits.size()
              << " exits)^" << config.devices << " devices = " << space << " assignments exceeds the cap of "
              << config.oracle_cap << "; reduce devices (config or GRLE_DEVICES) or raise --oracle-cap\n";
    return kUserError;
  }
  const CellResult cell = run_cell(config, exits, policy_name, o.out, true);
  std::cout << summary_line(cell.row) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRLE edge-offloading simulator"};
  app.require_subcommand(0, 1);
  bool print_default = false;
  app.add_flag("--print-default-config", print_default, "Print the default scenario config and exit");

  CommonOptions run_opts, sweep_opts, oracle_opts;
  std::string run_policy = "grle", oracle_policy = "grle";
  std::string sweep_policies = "grle,grl,drooe,droo", sweep_devices = "2,6,10,14", sweep_seeds = "1";
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  auto* run = app.add_subcommand("run", "Run one episode and write log.csv, metrics.csv and a checkpoint");
  add_common(run, run_opts);
  run->add_option("--policy", run_policy, "grle, grl, droo, drooe, oracle or random");

  auto* sweep = app.add_subcommand("sweep", "Run policies x device counts x seeds and plot the results");
  add_common(sweep, sweep_opts);
  sweep->add_option("--policy,--policies", sweep_policies, "Comma-separated policies");
  sweep->add_option("--devices", sweep_devices, "Comma-separated device counts M");
  sweep->add_option("--seeds", sweep_seeds, "Comma-separated seeds");
  sweep->add_option("--jobs", jobs, "Worker threads");

  auto* oracle = app.add_subcommand("oracle-compare", "Normalized reward of a policy against exhaustive search");
  add_common(oracle, oracle_opts);
  oracle->add_option("--policy", oracle_policy, "Policy to compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUserError;
  }

  try {
    if (print_default) {
      write_config(std::cout, ScenarioConfig{});
      return kOk;
    }
    if (*run) return cmd_run(run_opts, run_policy);
    if (*sweep) return cmd_sweep(sweep_opts, sweep_policies, sweep_devices, sweep_seeds, jobs);
    if (*oracle) return cmd_oracle_compare(oracle_opts, oracle_policy);
    std::cout << app.help();
    return kUserError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const OracleCapExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}
