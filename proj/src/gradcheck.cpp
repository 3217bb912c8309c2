#include "bridgepress/gradcheck.hpp"

#include <algorithm>
#include <numeric>

namespace bridgepress {

GradcheckReport gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                          const GradcheckOptions& options) {
  for (Tensor& t : inputs) {
    if (!t.is_leaf()) throw ContractError("gradcheck inputs must be leaf tensors");
    t.set_requires_grad(true);
    t.zero_grad();
  }
  loss().backward();
  std::vector<Vector> analytic;
  analytic.reserve(inputs.size());
  double largest = 0.0;
  for (const Tensor& t : inputs) {
    analytic.push_back(t.grad());
    largest = std::max(largest, analytic.back().norm());
  }
  const double floor = std::max(options.floor * largest, 1e-300);

  Rng rng(options.seed);
  GradcheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor& t = inputs[i];
    std::vector<Index> coords(static_cast<std::size_t>(t.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (t.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(options.max_coords_per_tensor));
    }
    Vector a(static_cast<Index>(coords.size()));
    Vector n(static_cast<Index>(coords.size()));
    for (std::size_t c = 0; c < coords.size(); ++c) {
      const Index k = coords[c];
      double& x = t.mutable_values()[k];
      const double saved = x;
      x = saved + options.step;
      const double up = loss().item();
      x = saved - options.step;
      const double down = loss().item();
      x = saved;
      n[static_cast<Index>(c)] = (up - down) / (2.0 * options.step);
      a[static_cast<Index>(c)] = analytic[i][k];
    }
    const double scale = std::max({a.norm(), n.norm(), floor});
    report.max_relative_error = std::max(report.max_relative_error, (a - n).norm() / scale);
    report.coordinates_checked += static_cast<Index>(coords.size());
  }
  for (Tensor& t : inputs) t.zero_grad();
  return report;
}

}  // namespace bridgepress
