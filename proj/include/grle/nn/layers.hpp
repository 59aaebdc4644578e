#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "grle/graph_state.hpp"
#include "grle/nn/autodiff.hpp"

namespace grle::nn {

// Fully connected layer y = x W + b with W stored fan_in x fan_out.
struct Dense {
  Parameter weight;
  Parameter bias;

  Dense() = default;
  Dense(std::string name, Index fan_in, Index fan_out);
  Var operator()(Tape& tape, Var x);
};

// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialisation of weight and bias.
void init_uniform(Dense& layer, std::uint64_t seed);

// Message passing structure of a graph: each edge carries one message in each
// direction, and every node averages the messages it receives.
struct MessagePlan {
  std::vector<int> msg_src;   // node sending message j
  std::vector<int> msg_edge;  // edge carrying message j
  std::shared_ptr<const SparseMatrix> mean;  // |V| x 2|E|

  explicit MessagePlan(const MecGraph& graph);
};

// One mean-aggregation layer:
// h_v' = ReLU([h_v, mean_{u ~ v}(h_u, a_uv)] W + b), isolated nodes aggregate 0.
Var graph_conv(Var h, const MessagePlan& plan, Var edge_attrs, Dense& layer);

// Per-edge embedding [h_src, h_dst, a_e]. Mean aggregation cannot tell a
// device which attribute came from which neighbour, so the edge's own
// attributes are appended for the classifier.
Var edge_embed(Var h, Var edge_attrs, const MecGraph& graph);

struct ActorConfig {
  Index gcn1 = 128;
  Index gcn2 = 64;
  Index mlp_hidden = 64;
};

struct ActorParams {
  Dense gcn1;
  Dense gcn2;
  Dense mlp1;
  Dense mlp2;

  ActorParams() : ActorParams(ActorConfig{}) {}
  explicit ActorParams(const ActorConfig& config);
  std::vector<Parameter*> parameters();
  void initialize(std::uint64_t seed);
};

// Relaxed action: sigmoid(MLP2(ReLU(MLP1(h_e)))) for every edge, as |E| x 1.
Var edge_score(Var edge_features, ActorParams& params);

// Two graph convolutions, edge embedding and edge scoring.
Var graph_actor_forward(Tape& tape, ActorParams& params, const MecGraph& graph);

// Mean binary cross-entropy over every edge of every graph in the batch.
struct BceTerm {
  Var probs;
  const Vector* targets;
};
Var bce_loss(std::span<const BceTerm> batch);

}  // namespace grle::nn
