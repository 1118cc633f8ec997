#pragma once

#include "dapointr/autograd.hpp"
#include "dapointr/random.hpp"

#include <deque>
#include <map>
#include <string>
#include <vector>

namespace dapointr::nn {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

/// Owns every Parameter of a model. Addresses are stable for the store's
/// lifetime, so layers hold raw pointers into it.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& create(const std::string& name, Matrix value);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  /// Parameters whose name starts with `prefix`.
  std::vector<Parameter*> with_prefix(const std::string& prefix);

  void zero_grad();
  Eigen::Index count() const;

  std::map<std::string, Matrix> snapshot() const;
  /// Every stored name must be present with a matching shape.
  void restore(const std::map<std::string, Matrix>& values);

 private:
  std::deque<Parameter> params_;
  std::map<std::string, Parameter*> index_;
};

Matrix xavier_uniform(Eigen::Index in, Eigen::Index out, Rng& rng);
Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

struct Linear {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out

  static Linear create(ParameterStore& store, const std::string& name, Eigen::Index in,
                       Eigen::Index out, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  Eigen::Index in_dim() const { return weight->value().rows(); }
  Eigen::Index out_dim() const { return weight->value().cols(); }
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* shift = nullptr;

  static LayerNorm create(ParameterStore& store, const std::string& name, Eigen::Index dim);
  Var operator()(Tape& tape, Var x) const;
};

/// Linear layers with GELU between them (none after the last).
struct Mlp {
  std::vector<Linear> layers;

  static Mlp create(ParameterStore& store, const std::string& name,
                    const std::vector<Eigen::Index>& dims, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  const Linear& last() const { return layers.back(); }
};

struct AdamWConfig {
  double learning_rate = 2e-4;
  double weight_decay = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with decoupled weight decay over a fixed parameter list.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWConfig cfg);

  void step();
  /// Frozen parameters are skipped entirely (no moment update, no decay).
  void set_trainable(const Parameter* p, bool trainable);
  long long steps() const noexcept { return t_; }
  const AdamWConfig& config() const noexcept { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

  struct State {
    long long t = 0;
    std::map<std::string, Matrix> m, v;
  };
  State state() const;
  void load_state(const State& s);

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_, v_;
  std::vector<bool> trainable_;
  AdamWConfig cfg_;
  long long t_ = 0;
};

}  // namespace dapointr::nn
