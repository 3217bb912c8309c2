#pragma once

#include <functional>
#include <vector>

#include "bridgepress/nn.hpp"

namespace bridgepress {

struct GradcheckOptions {
  double step = 1e-5;
  /// Coordinates probed per tensor; smaller tensors are checked exhaustively.
  Index max_coords_per_tensor = 24;
  std::uint64_t seed = 7;
  /// The error denominator is at least floor * G, with G the largest
  /// analytic gradient norm over all inputs. Gradients that vanish
  /// identically (a key bias under softmax shift invariance) are then judged
  /// against the scale of the whole gradient instead of as a ratio of two
  /// rounding noises.
  double floor = 1e-5;
};

struct GradcheckReport {
  double max_relative_error = 0.0;
  Index coordinates_checked = 0;
};

/// Compares reverse-mode gradients of `loss` with respect to `inputs` against
/// central finite differences. The error for each tensor is
/// |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|, floor * G) over the probed
/// coordinates (2-norms); the report holds the worst tensor. `loss` must
/// rebuild its graph on each call.
GradcheckReport gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                          const GradcheckOptions& options = {});

}  // namespace bridgepress
