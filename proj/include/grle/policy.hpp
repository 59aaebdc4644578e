#pragma once

#include <optional>
#include <string>

#include "grle/mec_model.hpp"

namespace grle {

struct SlotContext {
  const NetworkState& state;
  const SlotInput& slot;
  const ExitTable& exits;
  const ModelParams& model;
};

struct PolicyStep {
  OffloadingDecision decision;
  std::optional<double> loss;  // set when a training update ran this slot
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual PolicyStep step(const SlotContext& ctx) = 0;
};

}  // namespace grle
