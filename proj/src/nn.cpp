#include "bridgepress/nn.hpp"

#include <cmath>
#include <cstring>

namespace bridgepress {

void ParamSet::add(const std::string& name, const Tensor& param) {
  if (!param.defined()) throw ContractError("parameter '" + name + "' is undefined");
  if (!param.is_leaf()) throw ContractError("parameter '" + name + "' is not a leaf tensor");
  if (!params_.emplace(name, param).second) {
    throw ContractError("duplicate parameter name '" + name + "'");
  }
}

void ParamSet::merge(const ParamSet& other) {
  for (const auto& [name, p] : other) add(name, p);
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

Index ParamSet::element_count() const {
  Index n = 0;
  for (const auto& [_, p] : params_) n += p.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [_, p] : params_) p.zero_grad();
}

void ParamSet::freeze() {
  for (auto& [_, p] : params_) p.set_requires_grad(false);
}

bool ParamSet::frozen() const {
  for (const auto& [_, p] : params_) {
    if (p.requires_grad()) return false;
  }
  return true;
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, p] : params_) {
    mix(name.data(), name.size());
    mix(p.values().data(), static_cast<std::size_t>(p.size()) * sizeof(double));
  }
  return h;
}

void ParamSet::load_values(const ParamSet& source) {
  for (auto& [name, p] : params_) {
    if (!source.contains(name)) throw ManifestError("checkpoint lacks parameter '" + name + "'");
    const Tensor& src = source.at(name);
    if (src.shape() != p.shape()) {
      throw DimensionError("parameter '" + name + "' has shape " + shape_string(src.shape()) +
                           ", expected " + shape_string(p.shape()));
    }
    p.mutable_values() = src.values();
  }
}

Tensor he_uniform(Shape shape, Index fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Vector v(shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  return Tensor::parameter(std::move(shape), std::move(v));
}

Linear Linear::init(Index in, Index out, Rng& rng) {
  return {he_uniform({in, out}, in, rng), Tensor::parameter({out}, Vector::Zero(out))};
}

Linear Linear::identity(Index width) {
  RowMatrix eye = RowMatrix::Identity(width, width);
  return {Tensor::parameter({width, width}, Eigen::Map<Vector>(eye.data(), eye.size())),
          Tensor::parameter({width}, Vector::Zero(width))};
}

Tensor Linear::operator()(const Tensor& x) const { return add_rowwise(matmul(x, weight), bias); }

void Linear::register_params(ParamSet& set, const std::string& prefix) const {
  set.add(prefix + ".weight", weight);
  set.add(prefix + ".bias", bias);
}

Conv2d Conv2d::init(Index in, Index out, Index kernel, Index stride, Index padding, Rng& rng) {
  return {he_uniform({out, in, kernel, kernel}, in * kernel * kernel, rng),
          Tensor::parameter({out}, Vector::Zero(out)), stride, padding};
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }

void Conv2d::register_params(ParamSet& set, const std::string& prefix) const {
  set.add(prefix + ".weight", weight);
  set.add(prefix + ".bias", bias);
}

AttentionWeights AttentionWeights::init(Index width, Rng& rng) {
  AttentionWeights w;
  w.query = Linear::init(width, width, rng);
  w.key = Linear::init(width, width, rng);
  w.value = Linear::init(width, width, rng);
  w.output = Linear::init(width, width, rng);
  return w;
}

AttentionWeights AttentionWeights::identity(Index width) {
  return {Linear::identity(width), Linear::identity(width), Linear::identity(width),
          Linear::identity(width)};
}

void AttentionWeights::register_params(ParamSet& set, const std::string& prefix) const {
  query.register_params(set, prefix + ".query");
  key.register_params(set, prefix + ".key");
  value.register_params(set, prefix + ".value");
  output.register_params(set, prefix + ".output");
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionWeights& weights, Index heads) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw DimensionError("attention inputs must be [tokens, channels]");
  }
  const Index width = q.dim(1);
  if (k.dim(1) != width || v.dim(1) != width || k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: q " + shape_string(q.shape()) + ", k " +
                         shape_string(k.shape()) + ", v " + shape_string(v.shape()));
  }
  if (heads < 1 || width % heads != 0) {
    throw ConfigError("attention width " + std::to_string(width) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const Index head_dim = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const Tensor Q = weights.query(q);
  const Tensor K = weights.key(k);
  const Tensor V = weights.value(v);
  std::vector<Tensor> outputs;
  outputs.reserve(static_cast<std::size_t>(heads));
  for (Index h = 0; h < heads; ++h) {
    const Index b = h * head_dim, e = b + head_dim;
    const Tensor Qh = heads == 1 ? Q : slice(Q, 1, b, e);
    const Tensor Kh = heads == 1 ? K : slice(K, 1, b, e);
    const Tensor Vh = heads == 1 ? V : slice(V, 1, b, e);
    const Tensor scores = scale(matmul(Qh, transpose(Kh)), inv_sqrt);
    outputs.push_back(matmul(softmax(scores, 1), Vh));
  }
  const Tensor merged = heads == 1 ? outputs[0] : concat(outputs, 1);
  return weights.output(merged);
}

void Adam::step(ParamSet& params) {
  for (const auto& [name, p] : params) {
    if (!p.requires_grad() || !p.has_grad()) continue;
    State& s = state_[name];
    if (s.m.size() == 0) {
      s.m = Vector::Zero(p.size());
      s.v = Vector::Zero(p.size());
    }
    const Vector g = p.grad();
    ++s.t;
    s.m = options_.beta1 * s.m + (1.0 - options_.beta1) * g;
    s.v = options_.beta2 * s.v + (1.0 - options_.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(s.t));
    Tensor param = p;
    param.mutable_values().array() -=
        options_.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + options_.eps);
  }
}

}  // namespace bridgepress
