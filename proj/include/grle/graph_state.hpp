#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "grle/mec_model.hpp"

namespace grle {

enum class NodeKind { device, exit };

struct GraphEdge {
  int src = 0;     // device node
  int dst = 0;     // exit node
  int task = 0;    // index into the slot's task list
  int server = 0;
  int exit = 0;    // index into the full ExitTable
};

// Bipartite snapshot of one slot: devices first, then one node per
// (server, candidate exit), server-major. Edges run device -> exit.
struct MecGraph {
  static constexpr int kNodeFeatures = 6;
  static constexpr int kEdgeFeatures = 4;

  int slot = 0;
  int num_devices = 0;
  int num_servers = 0;
  std::vector<int> exit_subset;  // full-table indices of the candidate exits
  std::vector<int> device_ids;   // per device node
  Matrix node_features;          // |V| x 6
  std::vector<NodeKind> node_kind;
  std::vector<GraphEdge> edges;
  Matrix edge_attrs;             // |E| x 4

  int num_nodes() const { return static_cast<int>(node_kind.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int exit_node(int server, int local_exit) const {
    return num_devices + server * static_cast<int>(exit_subset.size()) + local_exit;
  }
  // Edge indices grouped per device node, ascending.
  std::vector<std::vector<int>> edges_by_device() const;
};

struct GraphScales {
  double size_kbytes = 100.0;
  double deadline_ms = 100.0;
  double backlog_ms = 100.0;
  double cmp_ms = 10.0;
  double rate_mbps = 100.0;
};

// Builds the policy-side view of a slot (estimated rates and capacities).
// Throws ConstraintViolation if a task has no reachable server.
MecGraph build_graph(const NetworkState& state, const SlotInput& slot, const ExitTable& exits,
                     std::span<const int> exit_subset, const ModelParams& params, const GraphScales& scales = {});

// Per-edge 0/1 labels marking the chosen (server, exit) of each device.
Vector decision_targets(const MecGraph& graph, const OffloadingDecision& decision);

// Decision that sends each device along the given edge.
OffloadingDecision decision_from_edges(const MecGraph& graph, std::span<const int> edge_per_device);

void to_json(nlohmann::json& j, const MecGraph& g);
void from_json(const nlohmann::json& j, MecGraph& g);

}  // namespace grle
