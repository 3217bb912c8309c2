#include "bridgepress/models.hpp"

#include <algorithm>
#include <cmath>

namespace bridgepress {

namespace {

Index half_up(Index n) { return (n + 1) / 2; }

Tensor act(const Tensor& x) { return leaky_relu(x, 0.2); }

Tensor up_to(const Tensor& x, Index rows, Index cols) { return crop2d(upsample2x(x), rows, cols); }

}  // namespace

// ---------------------------------------------------------------------------
// Generator

void GeneratorConfig::validate() const {
  const bool same = input_rows == output_rows && input_cols == output_cols;
  const bool twice = input_rows == 2 * output_rows && input_cols == 2 * output_cols;
  if (!same && !twice) {
    throw ConfigError("generator input must equal the output size or be exactly twice it");
  }
  if (output_rows < 4 || output_cols < 4) throw ConfigError("generator output too small");
  if (stem_channels < 1 || mid_channels < 1 || latent_channels < 1) {
    throw ConfigError("generator channel widths must be positive");
  }
  for (int s : skips) {
    if (s != 1 && s != 2) throw ConfigError("skip index " + std::to_string(s) + " is not 1 or 2");
  }
  if (neck_channels < 0) throw ConfigError("negative second-bottleneck width");
  if (neck_channels > 0 && !skips.empty()) {
    throw ConfigError("a second bottleneck requires skip connections to be disabled");
  }
  if (use_ils && (ils_heads < 1 || latent_channels % ils_heads != 0)) {
    throw ConfigError("latent channels must be divisible by the ILS head count");
  }
}

Index GeneratorConfig::latent_rows() const { return half_up(half_up(output_rows)); }
Index GeneratorConfig::latent_cols() const { return half_up(half_up(output_cols)); }

bool GeneratorConfig::has_skip(int index) const {
  return std::find(skips.begin(), skips.end(), index) != skips.end();
}

Generator::Generator(GeneratorConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const GeneratorConfig& c = config_;
  const Index stem_stride = c.input_rows == c.output_rows ? 1 : 2;
  stem_ = Conv2d::init(1, c.stem_channels, 3, stem_stride, 1, rng);
  down1_ = Conv2d::init(c.stem_channels, c.mid_channels, 3, 2, 1, rng);
  down2_ = Conv2d::init(c.mid_channels, c.latent_channels, 3, 2, 1, rng);
  if (c.use_ils) ils_.emplace(IlsConfig{c.latent_channels, c.ils_heads}, rng);
  if (c.neck_channels > 0) {
    neck_down_ = Conv2d::init(c.latent_channels, c.neck_channels, 1, 1, 0, rng);
    neck_up_ = Conv2d::init(c.neck_channels, c.latent_channels, 1, 1, 0, rng);
  }
  up1_ = Conv2d::init(c.latent_channels + (c.has_skip(2) ? c.mid_channels : 0), c.mid_channels, 3,
                      1, 1, rng);
  up2_ = Conv2d::init(c.mid_channels + (c.has_skip(1) ? c.stem_channels : 0), c.stem_channels, 3,
                      1, 1, rng);
  head_ = Conv2d::init(c.stem_channels, 1, 1, 1, 0, rng);
}

Generator::Encoding Generator::encode_features(const Tensor& input) const {
  const GeneratorConfig& c = config_;
  if (input.rank() != 3 || input.dim(0) != 1 || input.dim(1) != c.input_rows ||
      input.dim(2) != c.input_cols) {
    throw DimensionError("generator input must be [1," + std::to_string(c.input_rows) + "," +
                         std::to_string(c.input_cols) + "], got " + shape_string(input.shape()));
  }
  Encoding enc;
  enc.stem = act(stem_(input));
  enc.stage1 = act(down1_(enc.stem));
  enc.latent = act(down2_(enc.stage1));
  return enc;
}

Tensor Generator::apply_ils(const Tensor& z, const std::optional<AnthroRecord>& anthro,
                            const AnthroScale& scale) const {
  if (!ils_) return z;
  if (!anthro) throw ContractError("generator with ILS needs an anthropometric record");
  return (*ils_)(z, *anthro, scale);
}

Generator::Encoding Generator::encode(const Tensor& input, const std::optional<AnthroRecord>& anthro,
                                      const AnthroScale& scale) const {
  Encoding enc = encode_features(input);
  enc.latent = apply_ils(enc.latent, anthro, scale);
  if (neck_down_) enc.latent = (*neck_down_)(enc.latent);
  return enc;
}

Tensor Generator::decode(const Encoding& enc) const {
  const GeneratorConfig& c = config_;
  Tensor h = enc.latent;
  if (neck_up_) h = act((*neck_up_)(h));
  const Index r2 = half_up(c.output_rows), c2 = half_up(c.output_cols);
  h = up_to(h, r2, c2);
  if (c.has_skip(2)) h = concat({h, enc.stage1}, 0);
  h = act(up1_(h));
  h = up_to(h, c.output_rows, c.output_cols);
  if (c.has_skip(1)) h = concat({h, enc.stem}, 0);
  h = act(up2_(h));
  return head_(h);
}

Tensor Generator::decode_latent(const Tensor& latent) const {
  if (!config_.skips.empty()) throw ContractError("decode_latent needs a skip-free generator");
  Encoding enc;
  enc.latent = latent;
  return decode(enc);
}

Tensor Generator::forward(const Tensor& input, const std::optional<AnthroRecord>& anthro,
                          const AnthroScale& scale) const {
  return decode(encode(input, anthro, scale));
}

ParamSet Generator::params(const std::string& prefix) const {
  ParamSet set;
  stem_.register_params(set, prefix + ".stem");
  down1_.register_params(set, prefix + ".down1");
  down2_.register_params(set, prefix + ".down2");
  if (ils_) ils_->register_params(set, prefix + ".ils");
  if (neck_down_) {
    neck_down_->register_params(set, prefix + ".neck_down");
    neck_up_->register_params(set, prefix + ".neck_up");
  }
  up1_.register_params(set, prefix + ".up1");
  up2_.register_params(set, prefix + ".up2");
  head_.register_params(set, prefix + ".head");
  return set;
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(DiscriminatorConfig config, std::uint64_t seed) : config_(config) {
  if (config.in_channels < 1 || config.base_channels < 1) {
    throw ConfigError("discriminator widths must be positive");
  }
  Rng rng(seed);
  c1_ = Conv2d::init(config.in_channels, config.base_channels, 3, 2, 1, rng);
  c2_ = Conv2d::init(config.base_channels, 2 * config.base_channels, 3, 2, 1, rng);
  out_ = Conv2d::init(2 * config.base_channels, 1, 3, 1, 1, rng);
}

Tensor Discriminator::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != config_.in_channels) {
    throw DimensionError("discriminator expects " + std::to_string(config_.in_channels) +
                         " input channels, got " + shape_string(x.shape()));
  }
  return out_(act(c2_(act(c1_(x)))));
}

Tensor Discriminator::forward(const Tensor& condition, const Tensor& image) const {
  if (condition.rank() != 3 || image.rank() != 3 || condition.dim(1) != image.dim(1) ||
      condition.dim(2) != image.dim(2)) {
    throw DimensionError("condition " + shape_string(condition.shape()) +
                         " and image " + shape_string(image.shape()) + " differ spatially");
  }
  return forward(concat({condition, image}, 0));
}

ParamSet Discriminator::params(const std::string& prefix) const {
  ParamSet set;
  c1_.register_params(set, prefix + ".c1");
  c2_.register_params(set, prefix + ".c2");
  out_.register_params(set, prefix + ".out");
  return set;
}

// ---------------------------------------------------------------------------
// Denoiser

Vector timestep_embedding(int t, Index frequencies) {
  Vector emb(2 * frequencies);
  for (Index k = 0; k < frequencies; ++k) {
    const double f = std::exp(-std::log(10000.0) * static_cast<double>(k) /
                              static_cast<double>(frequencies));
    emb[k] = std::sin(t * f);
    emb[frequencies + k] = std::cos(t * f);
  }
  return emb;
}

Denoiser::Denoiser(DenoiserConfig config, std::uint64_t seed) : config_(config) {
  if (config.channels < 1 || config.base_channels < 1 || config.mid_channels < 1 ||
      config.time_frequencies < 1) {
    throw ConfigError("denoiser widths must be positive");
  }
  Rng rng(seed);
  const Index b = config.base_channels, m = config.mid_channels;
  in_ = Conv2d::init(2 * config.channels, b, 3, 1, 1, rng);
  down1_ = Conv2d::init(b, m, 3, 2, 1, rng);
  down2_ = Conv2d::init(m, m, 3, 2, 1, rng);
  up1_ = Conv2d::init(2 * m, m, 3, 1, 1, rng);
  up2_ = Conv2d::init(m + b, b, 3, 1, 1, rng);
  out_ = Conv2d::init(b, config.channels, 1, 1, 0, rng);
  time_in_ = Linear::init(2 * config.time_frequencies, b, rng);
  time_mid_ = Linear::init(2 * config.time_frequencies, m, rng);
  if (config.use_ils) ils_.emplace(IlsConfig{m, config.ils_heads}, rng);
}

Tensor Denoiser::forward(const Tensor& x_t, const Tensor& y, int t,
                         const std::optional<AnthroRecord>& anthro,
                         const AnthroScale& scale) const {
  if (x_t.rank() != 3 || x_t.shape() != y.shape() || x_t.dim(0) != config_.channels) {
    throw DimensionError("denoiser needs x_t and y of equal shape [" +
                         std::to_string(config_.channels) + ",H,W], got " +
                         shape_string(x_t.shape()) + " and " + shape_string(y.shape()));
  }
  const Tensor emb = Tensor::constant({1, 2 * config_.time_frequencies},
                                      timestep_embedding(t, config_.time_frequencies));
  const Tensor bias_in = in_.bias + reshape(time_in_(emb), {config_.base_channels});
  const Tensor bias_mid = down2_.bias + reshape(time_mid_(emb), {config_.mid_channels});

  const Tensor h0 = act(conv2d(concat({x_t, y}, 0), in_.weight, bias_in, 1, 1));
  const Tensor h1 = act(down1_(h0));
  Tensor h2 = act(conv2d(h1, down2_.weight, bias_mid, 2, 1));
  if (ils_) {
    if (!anthro) throw ContractError("denoiser with ILS needs an anthropometric record");
    h2 = (*ils_)(h2, *anthro, scale);
  }
  Tensor u = concat({up_to(h2, h1.dim(1), h1.dim(2)), h1}, 0);
  u = act(up1_(u));
  u = concat({up_to(u, h0.dim(1), h0.dim(2)), h0}, 0);
  u = act(up2_(u));
  return out_(u);
}

ParamSet Denoiser::params(const std::string& prefix) const {
  ParamSet set;
  in_.register_params(set, prefix + ".in");
  down1_.register_params(set, prefix + ".down1");
  down2_.register_params(set, prefix + ".down2");
  up1_.register_params(set, prefix + ".up1");
  up2_.register_params(set, prefix + ".up2");
  out_.register_params(set, prefix + ".out");
  time_in_.register_params(set, prefix + ".time_in");
  time_mid_.register_params(set, prefix + ".time_mid");
  if (ils_) ils_->register_params(set, prefix + ".ils");
  return set;
}

}  // namespace bridgepress
