#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "grle/nn/autodiff.hpp"

namespace grle::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Matrix m;
  Matrix v;
};

// One bias-corrected Adam update of a single parameter at step `t` (1-based).
void adam_step(Parameter& param, AdamMoments& moments, const AdamOptions& options, long t);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options = {});

  // Applies one update from the accumulated gradients. Throws
  // std::domain_error, leaving parameters untouched, if any gradient is not
  // finite.
  void step();
  void zero_grad();
  long steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<AdamMoments> moments_;
  AdamOptions options_;
  long t_ = 0;
};

// Scalar objective that records itself on the given tape.
using Objective = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares reverse-mode gradients of `f` against central finite differences,
// component by component. Relative error uses max(|a|, |n|, floor) as the
// denominator so components that vanish analytically are compared absolutely.
GradCheckResult grad_check(const Objective& f, std::span<Parameter* const> params, double h = 1e-4,
                           double floor = 1e-6);

// Text checkpoint: a shape manifest line per parameter followed by its values
// in row-major hexadecimal floating point, which round-trips bit-exactly.
void save_checkpoint(std::ostream& out, std::span<Parameter* const> params);
void load_checkpoint(std::istream& in, std::span<Parameter* const> params);
void save_checkpoint(const std::string& path, std::span<Parameter* const> params);
void load_checkpoint(const std::string& path, std::span<Parameter* const> params);

}  // namespace grle::nn
