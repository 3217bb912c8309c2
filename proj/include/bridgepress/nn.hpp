#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "bridgepress/tensor.hpp"

namespace bridgepress {

using Rng = std::mt19937_64;

/// Named parameters with sorted (deterministic) iteration order. Entries
/// share nodes with the modules that registered them.
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor>;

  void add(const std::string& name, const Tensor& param);
  void merge(const ParamSet& other);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }
  Index element_count() const;

  void zero_grad();
  /// Stops gradient tracking on every parameter.
  void freeze();
  bool frozen() const;
  /// FNV-1a over names and raw value bytes.
  std::uint64_t checksum() const;
  /// Copies values from `source` for every name present here; throws on a
  /// missing name or shape change.
  void load_values(const ParamSet& source);

 private:
  Map params_;
};

/// He-uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Tensor he_uniform(Shape shape, Index fan_in, Rng& rng);

/// y = x W + b with x [n, in], W [in, out], b [out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear init(Index in, Index out, Rng& rng);
  static Linear identity(Index width);
  Index in_features() const { return weight.dim(0); }
  Index out_features() const { return weight.dim(1); }
  Tensor operator()(const Tensor& x) const;
  void register_params(ParamSet& set, const std::string& prefix) const;
};

struct Conv2d {
  Tensor weight;  // [O, C, k, k]
  Tensor bias;    // [O]
  Index stride = 1;
  Index padding = 0;

  static Conv2d init(Index in, Index out, Index kernel, Index stride, Index padding, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void register_params(ParamSet& set, const std::string& prefix) const;
};

/// Projections for multi-head attention; all [C, C] with [C] biases.
struct AttentionWeights {
  Linear query;
  Linear key;
  Linear value;
  Linear output;

  static AttentionWeights init(Index width, Rng& rng);
  static AttentionWeights identity(Index width);
  void register_params(ParamSet& set, const std::string& prefix) const;
};

/// Concatenated scaled dot-product heads followed by the output projection.
/// q: [n_q, C], k/v: [n_k, C]; returns [n_q, C].
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionWeights& weights, Index heads);

/// Adam with bias correction; state is keyed by parameter name.
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(Options options) : options_(options) {}
  /// Updates every parameter that requires a gradient and holds one.
  void step(ParamSet& params);
  const Options& options() const { return options_; }

 private:
  struct State {
    Vector m;
    Vector v;
    std::int64_t t = 0;
  };
  Options options_;
  std::map<std::string, State> state_;
};

}  // namespace bridgepress
