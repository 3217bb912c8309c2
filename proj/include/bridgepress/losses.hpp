#pragma once

#include <optional>
#include <utility>

#include "bridgepress/models.hpp"
#include "bridgepress/physics.hpp"

namespace bridgepress {

/// Generator objective weights (lambda * (alpha SSIM + beta L2 + gamma WOL))
/// and the smoothed discriminator labels.
struct LossWeights {
  double lambda = 100.0;
  double alpha = 3.0;
  double beta = 0.01;
  double gamma = 0.01;
  double y_real = 0.9;
  double y_gen = 0.1;

  void validate() const;
};

/// Standard SSIM constants for unit dynamic range, Gaussian window.
struct SsimOptions {
  Index window = 11;
  double sigma = 1.5;
  double c1 = 1e-4;  // (0.01 L)^2
  double c2 = 9e-4;  // (0.03 L)^2
};

/// Mean SSIM over all full windows (valid region). a, b: [1, H, W].
Tensor ssim_index(const Tensor& a, const Tensor& b, const SsimOptions& options = {});

/// |sum(p - p_hat)| * divisor: the mass-consistency loss on kPa maps
/// reconstructed from normalized tensors.
Tensor wol_loss(const Tensor& p, const Tensor& p_hat, double divisor_kpa);

/// Smoothed-label discriminator loss, the two terms averaged:
///   0.5 * [BCE(real, y_real) + BCE(fake, y_gen)]
/// with BCE the mean binary cross-entropy over patches.
Tensor discriminator_loss(const Tensor& real_logits, const Tensor& fake_logits,
                          const LossWeights& w);

/// -E[log D(G(.))] written as BCE against label 1.
Tensor generator_adversarial_loss(const Tensor& fake_logits);

struct GeneratorLoss {
  Tensor adversarial;
  Tensor ssim;  // 1 - SSIM
  Tensor l2;
  Tensor wol;   // undefined when the objective has no WOL term
  Tensor total;
};

/// Adversarial term + lambda (alpha L_SSIM + beta L_L2 [+ gamma L_WOL]).
/// Pass `divisor_kpa` to include WOL (conditional objective); leave empty
/// for the unconditional reconstruction objective.
GeneratorLoss generator_loss(const Tensor& fake_logits, const Tensor& p_hat, const Tensor& p,
                             const LossWeights& w, std::optional<double> divisor_kpa,
                             const SsimOptions& ssim = {});

/// One (depth, pressure, anthropometrics) training triple as tensors.
struct ConditionalExample {
  Tensor depth;            // [1, H_in, W_in], generator input
  Tensor depth_condition;  // [1, H_out, W_out], discriminator condition
  PressureMap target;      // normalized
  std::optional<AnthroRecord> anthro;
};

Tensor pressure_tensor(const PressureMap& p);

/// Conditional discriminator loss for one example; G's output is detached.
Tensor loss_discriminator_cond(const ConditionalExample& ex, const Generator& g,
                               const Discriminator& d, const LossWeights& w,
                               const AnthroScale& scale);

/// Conditional generator loss for one example. Throws ContractError when the
/// target is not normalized.
GeneratorLoss loss_generator_cond(const ConditionalExample& ex, const Generator& g,
                                  const Discriminator& d, const LossWeights& w,
                                  const AnthroScale& scale, const SsimOptions& ssim = {});

/// Unconditional autoencoding pair: (L_D, L_G) where the reconstruction
/// target is the input itself and the generator objective has no WOL term.
std::pair<Tensor, GeneratorLoss> loss_unconditional_pair(const Tensor& x,
                                                         const std::optional<AnthroRecord>& anthro,
                                                         const Generator& g,
                                                         const Discriminator& d,
                                                         const LossWeights& w,
                                                         const AnthroScale& scale,
                                                         const SsimOptions& ssim = {});

}  // namespace bridgepress
