#pragma once

#include <optional>
#include <vector>

#include "bridgepress/ils.hpp"
#include "bridgepress/nn.hpp"

namespace bridgepress {

/// Toy encoder-decoder generator. A stem brings the input to the output
/// resolution (stride 2 when the input is twice as large), two stride-2
/// stages reach the latent grid, and the decoder mirrors them with nearest
/// upsampling. Skip 1 feeds the stem features into the last decoder stage,
/// skip 2 the first-stage features into the first decoder stage. No final
/// activation.
struct GeneratorConfig {
  Index input_rows = 54;
  Index input_cols = 128;
  Index output_rows = 27;
  Index output_cols = 64;
  Index stem_channels = 8;
  Index mid_channels = 16;
  Index latent_channels = 16;  // C_z
  std::vector<int> skips{1, 2};
  Index neck_channels = 0;  // second bottleneck width, 0 = none
  bool use_ils = true;
  Index ils_heads = 2;

  void validate() const;
  Index latent_rows() const;
  Index latent_cols() const;
  bool has_skip(int index) const;
};

class Generator {
 public:
  struct Encoding {
    Tensor latent;  // after ILS and the optional second bottleneck
    Tensor stem;    // skip 1 source
    Tensor stage1;  // skip 2 source
  };

  Generator(GeneratorConfig config, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }

  /// Encoder output before the ILS block: [C_z, H_z, W_z].
  Encoding encode_features(const Tensor& input) const;
  Encoding encode(const Tensor& input, const std::optional<AnthroRecord>& anthro,
                  const AnthroScale& scale) const;
  /// Decodes a latent; uses the skip tensors from `enc` when configured.
  Tensor decode(const Encoding& enc) const;
  /// Decodes from the latent alone (no skips may be configured).
  Tensor decode_latent(const Tensor& latent) const;
  /// input [1, H_in, W_in] -> normalized pressure [1, H_out, W_out].
  Tensor forward(const Tensor& input, const std::optional<AnthroRecord>& anthro,
                 const AnthroScale& scale) const;

  InformedLatentSpace* ils() { return ils_ ? &*ils_ : nullptr; }
  const InformedLatentSpace* ils() const { return ils_ ? &*ils_ : nullptr; }
  ParamSet params(const std::string& prefix = "gen") const;

 private:
  Tensor apply_ils(const Tensor& z, const std::optional<AnthroRecord>& anthro,
                   const AnthroScale& scale) const;

  GeneratorConfig config_;
  Conv2d stem_, down1_, down2_;
  std::optional<InformedLatentSpace> ils_;
  std::optional<Conv2d> neck_down_, neck_up_;
  Conv2d up1_, up2_, head_;
};

/// PatchGAN-style critic: two stride-2 convolutions and a 3x3 logit layer,
/// one logit per receptive-field patch.
struct DiscriminatorConfig {
  Index in_channels = 2;  // 2 = conditional (depth, pressure), 1 = unconditional
  Index base_channels = 8;
};

class Discriminator {
 public:
  Discriminator(DiscriminatorConfig config, std::uint64_t seed);
  const DiscriminatorConfig& config() const { return config_; }

  /// x: [in_channels, H, W] -> logits [1, ceil(H/4), ceil(W/4)].
  Tensor forward(const Tensor& x) const;
  /// Conditional form: channel-stacks the condition with the image.
  Tensor forward(const Tensor& condition, const Tensor& image) const;
  ParamSet params(const std::string& prefix = "disc") const;

 private:
  DiscriminatorConfig config_;
  Conv2d c1_, c2_, out_;
};

/// Small U-shaped noise predictor for the bridge: concat(x_t, y) plus a
/// sinusoidal time embedding, two down and two up stages, optional ILS at
/// the bottleneck.
struct DenoiserConfig {
  Index channels = 1;  // channels of x_t (and of y)
  Index base_channels = 8;
  Index mid_channels = 16;
  Index time_frequencies = 16;
  bool use_ils = false;
  Index ils_heads = 2;
};

Vector timestep_embedding(int t, Index frequencies);

class Denoiser {
 public:
  Denoiser(DenoiserConfig config, std::uint64_t seed);
  const DenoiserConfig& config() const { return config_; }

  Tensor forward(const Tensor& x_t, const Tensor& y, int t,
                 const std::optional<AnthroRecord>& anthro, const AnthroScale& scale) const;
  InformedLatentSpace* ils() { return ils_ ? &*ils_ : nullptr; }
  ParamSet params(const std::string& prefix = "den") const;

 private:
  DenoiserConfig config_;
  Conv2d in_, down1_, down2_, up1_, up2_, out_;
  Linear time_in_, time_mid_;
  std::optional<InformedLatentSpace> ils_;
};

}  // namespace bridgepress
