#include "dapointr/nn.hpp"

#include "dapointr/errors.hpp"

#include <cmath>

namespace dapointr::nn {

Parameter& ParameterStore::create(const std::string& name, Matrix value) {
  if (index_.count(name) != 0) throw ConfigError("duplicate parameter name '" + name + "'");
  params_.emplace_back(name, std::move(value));
  index_[name] = &params_.back();
  return params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> ParameterStore::with_prefix(const std::string& prefix) {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p.name().rfind(prefix, 0) == 0) out.push_back(&p);
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Eigen::Index ParameterStore::count() const {
  Eigen::Index n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::map<std::string, Matrix> ParameterStore::snapshot() const {
  std::map<std::string, Matrix> out;
  for (const auto& p : params_) out[p.name()] = p.value();
  return out;
}

void ParameterStore::restore(const std::map<std::string, Matrix>& values) {
  for (auto& p : params_) {
    auto it = values.find(p.name());
    if (it == values.end()) throw ConfigError("checkpoint lacks parameter '" + p.name() + "'");
    if (it->second.rows() != p.value().rows() || it->second.cols() != p.value().cols()) {
      throw ConfigError("checkpoint shape mismatch for '" + p.name() + "'");
    }
    p.value() = it->second;
  }
}

Matrix xavier_uniform(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  return w;
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> g(0.0, stddev);
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
  return w;
}

Linear Linear::create(ParameterStore& store, const std::string& name, Eigen::Index in,
                      Eigen::Index out, Rng& rng) {
  Linear l;
  l.weight = &store.create(name + ".weight", xavier_uniform(in, out, rng));
  l.bias = &store.create(name + ".bias", Matrix::Zero(1, out));
  return l;
}

Var Linear::operator()(Tape& tape, Var x) const {
  return ad::add_row(ad::matmul(x, tape.parameter(*weight)), tape.parameter(*bias));
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, Eigen::Index dim) {
  LayerNorm n;
  n.gain = &store.create(name + ".gain", Matrix::Ones(1, dim));
  n.shift = &store.create(name + ".shift", Matrix::Zero(1, dim));
  return n;
}

Var LayerNorm::operator()(Tape& tape, Var x) const {
  return ad::add_row(ad::mul_row(ad::layer_norm_rows(x), tape.parameter(*gain)), tape.parameter(*shift));
}

Mlp Mlp::create(ParameterStore& store, const std::string& name, const std::vector<Eigen::Index>& dims,
                Rng& rng) {
  if (dims.size() < 2) throw ConfigError("Mlp '" + name + "' needs at least two sizes");
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    m.layers.push_back(Linear::create(store, name + "." + std::to_string(i), dims[i], dims[i + 1], rng));
  }
  return m;
}

Var Mlp::operator()(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](tape, x);
    if (i + 1 < layers.size()) x = ad::gelu(x);
  }
  return x;
}

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.learning_rate > 0.0) || cfg_.weight_decay < 0.0) {
    throw ConfigError("learning rate must be > 0 and weight decay >= 0");
  }
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
    v_.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
  }
  trainable_.assign(params_.size(), true);
}

void AdamW::set_trainable(const Parameter* p, bool trainable) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i] == p) trainable_[i] = trainable;
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!trainable_[i]) continue;
    Parameter& p = *params_[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad();
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad().cwiseAbs2();
    p.value() *= (1.0 - cfg_.learning_rate * cfg_.weight_decay);
    p.value().array() -= cfg_.learning_rate * (m_[i].array() / bc1) /
                         ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

AdamW::State AdamW::state() const {
  State s;
  s.t = t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    s.m[params_[i]->name()] = m_[i];
    s.v[params_[i]->name()] = v_[i];
  }
  return s;
}

void AdamW::load_state(const State& s) {
  t_ = s.t;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& name = params_[i]->name();
    auto im = s.m.find(name);
    auto iv = s.v.find(name);
    if (im == s.m.end() || iv == s.v.end()) throw ConfigError("optimizer state lacks '" + name + "'");
    m_[i] = im->second;
    v_[i] = iv->second;
  }
}

}  // namespace dapointr::nn
