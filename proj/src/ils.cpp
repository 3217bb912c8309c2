#include "bridgepress/ils.hpp"

namespace bridgepress {

void validate_anthro(const AnthroRecord& record, const AnthroScale& scale) {
  if (!scale.is_set()) {
    throw ConfigError("anthropometric normalization divisors (mass_max, height_max) are not set");
  }
  if (!(record.mass_kg > 0.0) || record.mass_kg > scale.mass_max_kg) {
    throw ContractError("body mass " + std::to_string(record.mass_kg) + " kg outside (0, " +
                        std::to_string(scale.mass_max_kg) + "]");
  }
  if (!(record.height_m > 0.0) || record.height_m > scale.height_max_m) {
    throw ContractError("height " + std::to_string(record.height_m) + " m outside (0, " +
                        std::to_string(scale.height_max_m) + "]");
  }
  if (record.gender != 0 && record.gender != 1) {
    throw ContractError("gender flag must be 0 or 1");
  }
}

Tensor flatten_latent(const Tensor& latent) {
  if (latent.rank() != 3) throw DimensionError("latent must be [C,H,W], got " +
                                               shape_string(latent.shape()));
  const Index C = latent.dim(0), positions = latent.dim(1) * latent.dim(2);
  return transpose(reshape(latent, {C, positions}));
}

Tensor unflatten_latent(const Tensor& tokens, Index height, Index width) {
  if (tokens.rank() != 2 || tokens.dim(0) != height * width) {
    throw DimensionError("cannot unflatten " + shape_string(tokens.shape()) + " to " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  return reshape(transpose(tokens), {tokens.dim(1), height, width});
}

InformedLatentSpace::InformedLatentSpace(IlsConfig config, Rng& rng) : config_(config) {
  if (config.channels < 1 || config.heads < 1 || config.channels % config.heads != 0) {
    throw ConfigError("ILS channels must be a positive multiple of the head count");
  }
  embed_mass = Linear::init(1, config.channels, rng);
  embed_height = Linear::init(1, config.channels, rng);
  embed_gender = Linear::init(1, config.channels, rng);
  self_attention = AttentionWeights::init(config.channels, rng);
  cross_attention = AttentionWeights::init(config.channels, rng);
}

Tensor InformedLatentSpace::embed(const AnthroRecord& record, const AnthroScale& scale) const {
  validate_anthro(record, scale);
  auto token = [](const Linear& map, double input) {
    return map(Tensor::constant({1, 1}, Vector::Constant(1, input)));
  };
  return concat({token(embed_mass, record.mass_kg / scale.mass_max_kg),
                 token(embed_height, record.height_m / scale.height_max_m),
                 token(embed_gender, static_cast<double>(record.gender))},
                0);
}

Tensor InformedLatentSpace::self_attend(const Tensor& tokens) const {
  if (tokens.rank() != 2 || tokens.dim(0) != 3 || tokens.dim(1) != config_.channels) {
    throw DimensionError("anthropometric tokens must be [3, " + std::to_string(config_.channels) +
                         "], got " + shape_string(tokens.shape()));
  }
  // No residual here, unlike the cross-attention step.
  return layer_norm(multi_head_attention(tokens, tokens, tokens, self_attention, config_.heads));
}

Tensor InformedLatentSpace::inform(const Tensor& latent, const Tensor& tokens) const {
  if (latent.rank() != 3) {
    throw DimensionError("latent must be [C,H,W], got " + shape_string(latent.shape()));
  }
  if (latent.dim(0) != config_.channels || tokens.rank() != 2 ||
      tokens.dim(1) != config_.channels) {
    throw DimensionError("latent channels " + std::to_string(latent.dim(0)) +
                         " do not match token width " + std::to_string(config_.channels));
  }
  const Tensor z = flatten_latent(latent);
  const Tensor attended = multi_head_attention(z, tokens, tokens, cross_attention, config_.heads);
  return unflatten_latent(layer_norm(z + attended), latent.dim(1), latent.dim(2));
}

Tensor InformedLatentSpace::operator()(const Tensor& latent, const AnthroRecord& record,
                                       const AnthroScale& scale) const {
  return inform(latent, self_attend(embed(record, scale)));
}

void InformedLatentSpace::register_params(ParamSet& set, const std::string& prefix) const {
  embed_mass.register_params(set, prefix + ".embed_mass");
  embed_height.register_params(set, prefix + ".embed_height");
  embed_gender.register_params(set, prefix + ".embed_gender");
  self_attention.register_params(set, prefix + ".self_attention");
  cross_attention.register_params(set, prefix + ".cross_attention");
}

void InformedLatentSpace::zero_params() {
  ParamSet set;
  register_params(set, "ils");
  for (const auto& [_, p] : set) {
    Tensor t = p;
    t.mutable_values().setZero();
  }
}

}  // namespace bridgepress
