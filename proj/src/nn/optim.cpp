#include "grle/nn/optim.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace grle::nn {

void adam_step(Parameter& param, AdamMoments& moments, const AdamOptions& o, long t) {
  if (moments.m.size() == 0) {
    moments.m = Matrix::Zero(param.value.rows(), param.value.cols());
    moments.v = Matrix::Zero(param.value.rows(), param.value.cols());
  }
  if (moments.m.rows() != param.value.rows() || moments.m.cols() != param.value.cols() ||
      param.grad.rows() != param.value.rows() || param.grad.cols() != param.value.cols()) {
    throw DimensionError("adam: state for '" + param.name + "' is not congruent with the parameter");
  }
  moments.m = o.beta1 * moments.m + (1.0 - o.beta1) * param.grad;
  moments.v = o.beta2 * moments.v + (1.0 - o.beta2) * param.grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
  param.value.array() -= o.lr * (moments.m.array() / c1) / ((moments.v.array() / c2).sqrt() + o.eps);
}

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), moments_(params_.size()), options_(options) {}

void Adam::step() {
  for (const Parameter* p : params_) {
    if (!p->grad.allFinite()) throw std::domain_error("adam: non-finite gradient in '" + p->name + "'");
  }
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], moments_[i], options_, t_);
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

GradCheckResult grad_check(const Objective& f, std::span<Parameter* const> params, double h, double floor) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = f(tape);
    tape.backward(out);
  }
  auto evaluate = [&] {
    Tape tape;
    return f(tape).value()(0, 0);
  };
  GradCheckResult result;
  for (Parameter* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + h;
      const double up = evaluate();
      x = saved - h;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

void save_checkpoint(std::ostream& out, std::span<Parameter* const> params) {
  out << "grle-checkpoint 1 " << params.size() << '\n';
  out << std::hexfloat;
  for (const Parameter* p : params) {
    out << "param " << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    for (Index r = 0; r < p->value.rows(); ++r) {
      for (Index c = 0; c < p->value.cols(); ++c) out << (c ? " " : "") << p->value(r, c);
      out << '\n';
    }
  }
  out << std::defaultfloat;
}

void load_checkpoint(std::istream& in, std::span<Parameter* const> params) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version >> count) || magic != "grle-checkpoint" || version != 1) {
    throw std::runtime_error("not a grle checkpoint");
  }
  if (count != params.size()) throw DimensionError("checkpoint holds " + std::to_string(count) + " parameters");
  for (Parameter* p : params) {
    std::string tag, name;
    Index rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "param") throw std::runtime_error("malformed checkpoint manifest");
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
      throw DimensionError("checkpoint entry '" + name + "' does not match parameter '" + p->name + "'");
    }
    for (Index i = 0; i < rows * cols; ++i) {
      std::string token;
      if (!(in >> token)) throw std::runtime_error("truncated checkpoint");
      // strtod parses hexadecimal floats; istream extraction does not reliably.
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0') throw std::runtime_error("bad checkpoint value '" + token + "'");
      p->value(i / cols, i % cols) = v;
    }
    p->zero_grad();
  }
}

void save_checkpoint(const std::string& path, std::span<Parameter* const> params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, params);
}

void load_checkpoint(const std::string& path, std::span<Parameter* const> params) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  load_checkpoint(in, params);
}

}  // namespace grle::nn
