#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "somnilex/ad/graph.hpp"
#include "somnilex/common.hpp"

namespace somnilex::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_location;
};

// Central finite differences against the reverse-mode gradient, in double
// precision. `build` constructs a fresh graph over the given leaves and
// returns the scalar output; it is re-invoked for each probe so side-effect
// free construction is required. When `max_coords_per_input` is positive,
// only that many randomly chosen coordinates of each input are probed
// (used for large parameter sets); otherwise every coordinate is checked.
//
// The reported figure is the worst relative error |a-n|/max(|a|,|n|); when
// both the analytic and numeric values are below 1e-8 the absolute error is
// used instead.
inline GradCheckReport grad_check(
    const std::function<NodePtr<double>(const std::vector<NodePtr<double>>&)>& build,
    const std::vector<NodePtr<double>>& inputs, double eps = 1e-5,
    int max_coords_per_input = -1, Rng* sampler = nullptr) {
  for (const auto& in : inputs) in->zero_grad();

  NodePtr<double> root = build(inputs);
  if (root->value.numel() != 1)
    throw ShapeError("grad_check requires a scalar output, got shape " +
                     root->value.shape_str());
  backward(root);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& in : inputs) {
    in->ensure_grad();
    analytic.push_back(in->grad.data);
  }

  auto eval = [&]() {
    NoGradGuard off;
    NodePtr<double> out = build(inputs);
    return out->value.data[0];
  };

  GradCheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& x = inputs[i]->value.data;
    std::vector<std::size_t> coords;
    if (max_coords_per_input > 0 &&
        x.size() > static_cast<std::size_t>(max_coords_per_input)) {
      if (!sampler)
        throw ConfigError("grad_check: coordinate subsampling needs an RNG");
      for (int k = 0; k < max_coords_per_input; ++k)
        coords.push_back(static_cast<std::size_t>(sampler->uniform_int(x.size())));
    } else {
      coords.resize(x.size());
      for (std::size_t k = 0; k < x.size(); ++k) coords[k] = k;
    }
    for (std::size_t k : coords) {
      const double saved = x[k];
      x[k] = saved + eps;
      const double fp = eval();
      x[k] = saved - eps;
      const double fm = eval();
      x[k] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[i][k];
      double err;
      if (std::abs(a) < 1e-8 && std::abs(numeric) < 1e-8)
        err = std::abs(a - numeric);
      else
        err = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_location = "input " + std::to_string(i) + " coord " +
                                std::to_string(k) + " analytic " +
                                std::to_string(a) + " numeric " +
                                std::to_string(numeric);
      }
    }
  }
  return report;
}

}  // namespace somnilex::ad
