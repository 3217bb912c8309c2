#pragma once

#include <optional>

#include "bridgepress/nn.hpp"

namespace bridgepress {

/// Body mass, height and gender of one subject.
struct AnthroRecord {
  double mass_kg = 0.0;
  double height_m = 0.0;
  int gender = 0;  // 0 or 1
};

/// Dataset-level divisors applied before embedding (largest mass and height
/// in the dataset). Zero means unset.
struct AnthroScale {
  double mass_max_kg = 0.0;
  double height_max_m = 0.0;

  bool is_set() const { return mass_max_kg > 0.0 && height_max_m > 0.0; }
};

/// Throws ConfigError for unset divisors and ContractError when the record
/// falls outside (0, max] or the gender flag is not 0/1.
void validate_anthro(const AnthroRecord& record, const AnthroScale& scale);

/// [C, H, W] -> [H*W, C] (one token per spatial position).
Tensor flatten_latent(const Tensor& latent);
/// [H*W, C] -> [C, H, W].
Tensor unflatten_latent(const Tensor& tokens, Index height, Index width);

struct IlsConfig {
  Index channels = 16;
  Index heads = 2;
};

/// Informed latent space: embeds (mass, height, gender) as three tokens,
/// self-attends over them, then cross-attends the latent positions to the
/// tokens:
///
///   E   = [e_m; e_h; e_g]                 (3 x C)
///   A   = layernorm(MHA(E, E, E))
///   z~  = layernorm(z + MHA(z, A, A))      (z flattened to d_z x C)
///
/// The layer norms carry no affine parameters, so a block with every
/// parameter zeroed reduces to a per-position layer norm of z.
class InformedLatentSpace {
 public:
  InformedLatentSpace() = default;
  InformedLatentSpace(IlsConfig config, Rng& rng);

  const IlsConfig& config() const { return config_; }

  /// Rows are e_m, e_h, e_g in that order.
  Tensor embed(const AnthroRecord& record, const AnthroScale& scale) const;
  Tensor self_attend(const Tensor& tokens) const;
  /// latent: [C, H, W]; tokens: [3, C]. Output has the latent's shape.
  Tensor inform(const Tensor& latent, const Tensor& tokens) const;
  /// embed -> self_attend -> inform.
  Tensor operator()(const Tensor& latent, const AnthroRecord& record,
                    const AnthroScale& scale) const;

  void register_params(ParamSet& set, const std::string& prefix) const;
  void zero_params();

  Linear embed_mass;
  Linear embed_height;
  Linear embed_gender;
  AttentionWeights self_attention;
  AttentionWeights cross_attention;

 private:
  IlsConfig config_;
};

}  // namespace bridgepress
