#include "grle/nn/layers.hpp"

#include "grle/random.hpp"

namespace grle::nn {

Dense::Dense(std::string name, Index fan_in, Index fan_out)
    : weight(name + ".weight", Matrix::Zero(fan_in, fan_out)), bias(name + ".bias", Matrix::Zero(1, fan_out)) {}

Var Dense::operator()(Tape& tape, Var x) { return add_row(matmul(x, tape.param(weight)), tape.param(bias)); }

void init_uniform(Dense& layer, std::uint64_t seed) {
  Rng rng(seed, Stream::init);
  const double bound = std::sqrt(1.0 / static_cast<double>(layer.weight.value.rows()));
  for (Index i = 0; i < layer.weight.value.size(); ++i) layer.weight.value.data()[i] = rng.uniform(-bound, bound);
  for (Index i = 0; i < layer.bias.value.size(); ++i) layer.bias.value.data()[i] = rng.uniform(-bound, bound);
  layer.weight.zero_grad();
  layer.bias.zero_grad();
}

MessagePlan::MessagePlan(const MecGraph& graph) {
  const int num_edges = graph.num_edges();
  msg_src.reserve(2 * num_edges);
  msg_edge.reserve(2 * num_edges);
  std::vector<int> msg_dst;
  msg_dst.reserve(2 * num_edges);
  for (int e = 0; e < num_edges; ++e) {
    const GraphEdge& edge = graph.edges[e];
    msg_src.push_back(edge.src);
    msg_dst.push_back(edge.dst);
    msg_edge.push_back(e);
    msg_src.push_back(edge.dst);
    msg_dst.push_back(edge.src);
    msg_edge.push_back(e);
  }
  std::vector<int> degree(graph.num_nodes(), 0);
  for (int d : msg_dst) ++degree[d];
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(msg_dst.size());
  for (std::size_t j = 0; j < msg_dst.size(); ++j) {
    entries.emplace_back(msg_dst[j], static_cast<int>(j), 1.0 / degree[msg_dst[j]]);
  }
  auto op = std::make_shared<SparseMatrix>(graph.num_nodes(), static_cast<Index>(msg_dst.size()));
  op->setFromTriplets(entries.begin(), entries.end());
  mean = std::move(op);
}

Var graph_conv(Var h, const MessagePlan& plan, Var edge_attrs, Dense& layer) {
  if (layer.weight.value.rows() != 2 * h.cols() + edge_attrs.cols()) {
    throw DimensionError("graph_conv: weight expects " + std::to_string(layer.weight.value.rows()) +
                         " inputs, features give " + std::to_string(2 * h.cols() + edge_attrs.cols()));
  }
  if (plan.mean->rows() != h.rows()) throw DimensionError("graph_conv: feature rows do not match node count");
  Tape& tape = h.tape();
  Var messages = concat_cols(gather_rows(h, plan.msg_src), gather_rows(edge_attrs, plan.msg_edge));
  Var aggregated = spmm(plan.mean, messages);
  return relu(layer(tape, concat_cols(h, aggregated)));
}

Var edge_embed(Var h, Var edge_attrs, const MecGraph& graph) {
  std::vector<int> src, dst;
  src.reserve(graph.edges.size());
  dst.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    src.push_back(e.src);
    dst.push_back(e.dst);
  }
  return concat_cols(concat_cols(gather_rows(h, std::move(src)), gather_rows(h, std::move(dst))), edge_attrs);
}

ActorParams::ActorParams(const ActorConfig& c)
    : gcn1("gcn1", 2 * MecGraph::kNodeFeatures + MecGraph::kEdgeFeatures, c.gcn1),
      gcn2("gcn2", 2 * c.gcn1 + MecGraph::kEdgeFeatures, c.gcn2),
      mlp1("mlp1", 2 * c.gcn2 + MecGraph::kEdgeFeatures, c.mlp_hidden),
      mlp2("mlp2", c.mlp_hidden, 1) {}

std::vector<Parameter*> ActorParams::parameters() {
  return {&gcn1.weight, &gcn1.bias, &gcn2.weight, &gcn2.bias, &mlp1.weight, &mlp1.bias, &mlp2.weight, &mlp2.bias};
}

void ActorParams::initialize(std::uint64_t seed) {
  init_uniform(gcn1, seed * 4 + 0);
  init_uniform(gcn2, seed * 4 + 1);
  init_uniform(mlp1, seed * 4 + 2);
  init_uniform(mlp2, seed * 4 + 3);
}

Var edge_score(Var edge_features, ActorParams& params) {
  Tape& tape = edge_features.tape();
  return sigmoid(params.mlp2(tape, relu(params.mlp1(tape, edge_features))));
}

Var graph_actor_forward(Tape& tape, ActorParams& params, const MecGraph& graph) {
  const MessagePlan plan(graph);
  Var h0 = tape.constant(graph.node_features);
  Var attrs = tape.constant(graph.edge_attrs);
  Var h1 = graph_conv(h0, plan, attrs, params.gcn1);
  Var h2 = graph_conv(h1, plan, attrs, params.gcn2);
  return edge_score(edge_embed(h2, attrs, graph), params);
}

Var bce_loss(std::span<const BceTerm> batch) {
  if (batch.empty()) throw std::invalid_argument("bce_loss: empty batch");
  Index total = 0;
  Var sum;
  for (const auto& term : batch) {
    Var part = bce_sum(term.probs, *term.targets);
    sum = sum.id() < 0 ? part : add(sum, part);
    total += term.targets->size();
  }
  if (total == 0) throw std::invalid_argument("bce_loss: batch has no edges");
  return scale(sum, 1.0 / static_cast<double>(total));
}

}  // namespace grle::nn
