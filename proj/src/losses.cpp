#include "bridgepress/losses.hpp"

#include <cmath>

namespace bridgepress {

void LossWeights::validate() const {
  if (lambda < 0 || alpha < 0 || beta < 0 || gamma < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (y_real < 0 || y_real > 1 || y_gen < 0 || y_gen > 1) {
    throw ConfigError("discriminator labels must lie in [0, 1]");
  }
}

namespace {

Tensor gaussian_window(const SsimOptions& o) {
  if (o.window < 1 || o.window % 2 == 0) throw ConfigError("SSIM window must be odd");
  const Index r = o.window / 2;
  Vector k1(o.window);
  for (Index i = -r; i <= r; ++i) k1[i + r] = std::exp(-0.5 * double(i * i) / (o.sigma * o.sigma));
  k1 /= k1.sum();
  Vector k2(o.window * o.window);
  for (Index i = 0; i < o.window; ++i)
    for (Index j = 0; j < o.window; ++j) k2[i * o.window + j] = k1[i] * k1[j];
  return Tensor::constant({1, 1, o.window, o.window}, k2);
}

}  // namespace

Tensor ssim_index(const Tensor& a, const Tensor& b, const SsimOptions& o) {
  if (a.shape() != b.shape() || a.rank() != 3 || a.dim(0) != 1) {
    throw DimensionError("ssim_index needs equal [1,H,W] inputs, got " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  if (a.dim(1) < o.window || a.dim(2) < o.window) {
    throw DimensionError("SSIM window " + std::to_string(o.window) + " exceeds image " +
                         shape_string(a.shape()));
  }
  const Tensor k = gaussian_window(o);
  const Tensor none;
  auto filt = [&](const Tensor& x) { return conv2d(x, k, none, 1, 0); };
  const Tensor mu_a = filt(a), mu_b = filt(b);
  const Tensor mu_aa = square(mu_a), mu_bb = square(mu_b), mu_ab = mu_a * mu_b;
  const Tensor var_a = filt(square(a)) - mu_aa;
  const Tensor var_b = filt(square(b)) - mu_bb;
  const Tensor cov = filt(a * b) - mu_ab;
  const Tensor num = add_scalar(2.0 * mu_ab, o.c1) * add_scalar(2.0 * cov, o.c2);
  const Tensor den = add_scalar(mu_aa + mu_bb, o.c1) * add_scalar(var_a + var_b, o.c2);
  return mean(num / den);
}

Tensor wol_loss(const Tensor& p, const Tensor& p_hat, double divisor_kpa) {
  return scale(abs(sum(p - p_hat)), divisor_kpa);
}

Tensor discriminator_loss(const Tensor& real_logits, const Tensor& fake_logits,
                          const LossWeights& w) {
  w.validate();
  return scale(bce_with_logits(real_logits, w.y_real) + bce_with_logits(fake_logits, w.y_gen),
               0.5);
}

Tensor generator_adversarial_loss(const Tensor& fake_logits) {
  return bce_with_logits(fake_logits, 1.0);
}

GeneratorLoss generator_loss(const Tensor& fake_logits, const Tensor& p_hat, const Tensor& p,
                             const LossWeights& w, std::optional<double> divisor_kpa,
                             const SsimOptions& ssim) {
  w.validate();
  GeneratorLoss out;
  out.adversarial = generator_adversarial_loss(fake_logits);
  out.ssim = add_scalar(neg(ssim_index(p, p_hat, ssim)), 1.0);
  out.l2 = mean(square(p - p_hat));
  Tensor recon = w.alpha * out.ssim + w.beta * out.l2;
  if (divisor_kpa) {
    out.wol = wol_loss(p, p_hat, *divisor_kpa);
    recon = recon + w.gamma * out.wol;
  }
  out.total = out.adversarial + w.lambda * recon;
  return out;
}

Tensor pressure_tensor(const PressureMap& p) {
  return Tensor::constant({1, p.rows(), p.cols()},
                          Eigen::Map<const Vector>(p.values.data(), p.values.size()));
}

Tensor loss_discriminator_cond(const ConditionalExample& ex, const Generator& g,
                               const Discriminator& d, const LossWeights& w,
                               const AnthroScale& scale) {
  if (!ex.target.normalized) throw ContractError("training targets must be normalized");
  const Tensor fake = g.forward(ex.depth, ex.anthro, scale).detach();
  const Tensor real_logits = d.forward(ex.depth_condition, pressure_tensor(ex.target));
  const Tensor fake_logits = d.forward(ex.depth_condition, fake);
  return discriminator_loss(real_logits, fake_logits, w);
}

GeneratorLoss loss_generator_cond(const ConditionalExample& ex, const Generator& g,
                                  const Discriminator& d, const LossWeights& w,
                                  const AnthroScale& scale, const SsimOptions& ssim) {
  if (!ex.target.normalized) {
    throw ContractError("generator output is normalized but the target is in kPa");
  }
  const Tensor p_hat = g.forward(ex.depth, ex.anthro, scale);
  const Tensor fake_logits = d.forward(ex.depth_condition, p_hat);
  return generator_loss(fake_logits, p_hat, pressure_tensor(ex.target), w, ex.target.divisor_kpa,
                        ssim);
}

std::pair<Tensor, GeneratorLoss> loss_unconditional_pair(const Tensor& x,
                                                         const std::optional<AnthroRecord>& anthro,
                                                         const Generator& g,
                                                         const Discriminator& d,
                                                         const LossWeights& w,
                                                         const AnthroScale& scale,
                                                         const SsimOptions& ssim) {
  const Tensor x_hat = g.forward(x, anthro, scale);
  const Tensor loss_d = discriminator_loss(d.forward(x), d.forward(x_hat.detach()), w);
  GeneratorLoss loss_g = generator_loss(d.forward(x_hat), x_hat, x, w, std::nullopt, ssim);
  return {loss_d, std::move(loss_g)};
}

}  // namespace bridgepress
