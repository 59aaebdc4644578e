#include "grle/graph_state.hpp"

namespace grle {

std::vector<std::vector<int>> MecGraph::edges_by_device() const {
  std::vector<std::vector<int>> groups(num_devices);
  for (int e = 0; e < num_edges(); ++e) groups[edges[e].src].push_back(e);
  return groups;
}

MecGraph build_graph(const NetworkState& state, const SlotInput& slot, const ExitTable& exits,
                     std::span<const int> exit_subset, const ModelParams& params, const GraphScales& scales) {
  MecGraph g;
  g.slot = slot.slot;
  g.num_devices = static_cast<int>(slot.tasks.size());
  g.num_servers = static_cast<int>(state.servers.size());
  g.exit_subset.assign(exit_subset.begin(), exit_subset.end());
  const int num_local = static_cast<int>(exit_subset.size());
  const int num_nodes = g.num_devices + g.num_servers * num_local;
  const double slot_start = (slot.slot - 1) * params.slot_len_ms;

  g.node_features = Matrix::Zero(num_nodes, MecGraph::kNodeFeatures);
  g.node_kind.assign(num_nodes, NodeKind::exit);

  for (int i = 0; i < g.num_devices; ++i) {
    const Task& task = slot.tasks[i];
    g.device_ids.push_back(task.device_id);
    g.node_kind[i] = NodeKind::device;
    const double backlog = std::max(0.0, state.devices[task.device_id].last_arrival_ms - slot_start);
    g.node_features.row(i) << 1.0, 0.0, task.size_kbytes / scales.size_kbytes, task.deadline_ms / scales.deadline_ms,
        backlog / scales.backlog_ms, 0.0;
  }
  for (int n = 0; n < g.num_servers; ++n) {
    const auto& server = state.servers[n];
    const double capacity = slot.capacity_est[n];
    const double backlog = std::max(0.0, server.free_at_ms - slot_start);
    for (int l = 0; l < num_local; ++l) {
      const int exit = exit_subset[l];
      const double t_cmp = computation_time(exits.base_time(exit, server.type), 1.0, capacity);
      g.node_features.row(g.exit_node(n, l)) << 0.0, 1.0, exits[exit].accuracy, t_cmp / scales.cmp_ms,
          backlog / scales.backlog_ms, capacity;
    }
  }

  std::vector<RowVector> attrs;
  for (int i = 0; i < g.num_devices; ++i) {
    const Task& task = slot.tasks[i];
    bool any = false;
    const std::size_t first = attrs.size();
    for (int n = 0; n < g.num_servers; ++n) {
      if (!task.reachable(n)) continue;
      any = true;
      const double rate = task.est_rate_mbps[n];
      const double t_com = transmission_time(task.size_kbytes, rate);
      const double arrival =
          arrival_time(state.devices[task.device_id].last_arrival_ms, slot.slot, params.slot_len_ms, t_com);
      const double t_wait = waiting_time(state.servers[n].free_at_ms, arrival);
      for (int l = 0; l < num_local; ++l) {
        const int exit = exit_subset[l];
        g.edges.push_back({i, g.exit_node(n, l), i, n, exit});
        // Completion time if this task were alone in the slot; column 3 holds
        // its reward for now and becomes the regret below.
        const double t_cmp = computation_time(exits.base_time(exit, state.servers[n].type), 1.0, slot.capacity_est[n]);
        const double t_total = t_com + t_wait + t_cmp;
        RowVector a(MecGraph::kEdgeFeatures);
        a << rate / scales.rate_mbps, t_com / task.deadline_ms, t_total / task.deadline_ms,
            exits[exit].accuracy * psi(t_total, task.deadline_ms, params.psi_mode);
        attrs.push_back(std::move(a));
      }
    }
    if (!any) throw ConstraintViolation("device " + std::to_string(task.device_id) + " has no reachable server");
    // Shortfall against the device's best edge, in units of 2% of the best
    // reward and capped at 1. Exits that differ by a few percent in reward
    // then differ by O(1) in input.
    double best = 0.0;
    for (std::size_t e = first; e < attrs.size(); ++e) best = std::max(best, attrs[e](3));
    for (std::size_t e = first; e < attrs.size(); ++e) {
      attrs[e](3) = best > 0.0 ? std::min(1.0, (best - attrs[e](3)) / (0.02 * best)) : 0.0;
    }
  }
  g.edge_attrs.resize(static_cast<Index>(attrs.size()), MecGraph::kEdgeFeatures);
  for (std::size_t e = 0; e < attrs.size(); ++e) g.edge_attrs.row(static_cast<Index>(e)) = attrs[e];
  return g;
}

Vector decision_targets(const MecGraph& graph, const OffloadingDecision& decision) {
  Vector targets = Vector::Zero(graph.num_edges());
  for (int e = 0; e < graph.num_edges(); ++e) {
    const GraphEdge& edge = graph.edges[e];
    const int device = graph.device_ids[edge.src];
    for (const Assignment& a : decision.assignments) {
      if (a.device_id == device && a.server == edge.server && a.exit == edge.exit) {
        targets(e) = 1.0;
        break;
      }
    }
  }
  return targets;
}

OffloadingDecision decision_from_edges(const MecGraph& graph, std::span<const int> edge_per_device) {
  OffloadingDecision d;
  d.assignments.reserve(edge_per_device.size());
  for (int e : edge_per_device) {
    const GraphEdge& edge = graph.edges[e];
    d.assignments.push_back({graph.device_ids[edge.src], edge.server, edge.exit});
  }
  return d;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Index cols) {
  Matrix m(static_cast<Index>(j.size()), cols);
  for (Index r = 0; r < m.rows(); ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Index>(row.size()) != cols) throw DimensionError("graph snapshot row has wrong width");
    for (Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const MecGraph& g) {
  auto edges = nlohmann::json::array();
  for (const auto& e : g.edges) edges.push_back({e.src, e.dst, e.task, e.server, e.exit});
  auto kinds = nlohmann::json::array();
  for (auto k : g.node_kind) kinds.push_back(k == NodeKind::device ? "device" : "exit");
  j = nlohmann::json{{"slot", g.slot},
                     {"num_devices", g.num_devices},
                     {"num_servers", g.num_servers},
                     {"exit_subset", g.exit_subset},
                     {"device_ids", g.device_ids},
                     {"node_kind", kinds},
                     {"node_features", matrix_to_json(g.node_features)},
                     {"edges", edges},
                     {"edge_attrs", matrix_to_json(g.edge_attrs)}};
}

void from_json(const nlohmann::json& j, MecGraph& g) {
  g.slot = j.at("slot").get<int>();
  g.num_devices = j.at("num_devices").get<int>();
  g.num_servers = j.at("num_servers").get<int>();
  g.exit_subset = j.at("exit_subset").get<std::vector<int>>();
  g.device_ids = j.at("device_ids").get<std::vector<int>>();
  g.node_kind.clear();
  for (const auto& k : j.at("node_kind")) g.node_kind.push_back(k.get<std::string>() == "device" ? NodeKind::device : NodeKind::exit);
  g.node_features = matrix_from_json(j.at("node_features"), MecGraph::kNodeFeatures);
  g.edges.clear();
  for (const auto& e : j.at("edges")) {
    g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>(), e.at(3).get<int>(), e.at(4).get<int>()});
  }
  g.edge_attrs = matrix_from_json(j.at("edge_attrs"), MecGraph::kEdgeFeatures);
  if (g.node_features.rows() != g.num_nodes()) throw DimensionError("graph snapshot node count mismatch");
  if (g.edge_attrs.rows() != g.num_edges()) throw DimensionError("graph snapshot edge count mismatch");
}

}  // namespace grle
