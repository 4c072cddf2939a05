#pragma once

#include <cmath>

#include "somnilex/ad/params.hpp"
#include "somnilex/common.hpp"

namespace somnilex::ad {

struct AdamHyper {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;  // L2, coupled into the gradient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("adam: learning rate must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ConfigError("adam: betas must lie in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("adam: weight decay must be >= 0");
  }
};

// Step-based schedule: the learning rate drops by a factor of 0.1 every 5
// training epochs.
inline double step_lr(int epoch_index, double base_lr) {
  if (epoch_index < 0) throw ConfigError("step_lr: negative epoch index");
  return base_lr * std::pow(0.1, epoch_index / 5);
}

// Bias-corrected Adam update over every non-frozen parameter, with the L2
// term added to the raw gradient before the moment updates. Requires
// exclusive access to the store.
template <class S>
void adam_step(ParameterStore<S>& store, const AdamHyper& hyper) {
  hyper.validate();
  for (auto& [name, p] : store.all()) {
    if (p.frozen) continue;
    if (p.node->grad.data.size() != p.node->value.numel())
      throw ConfigError("adam_step: missing gradient on parameter " + name);
    p.t += 1;
    const S b1 = static_cast<S>(hyper.beta1), b2 = static_cast<S>(hyper.beta2);
    const S bias1 = static_cast<S>(1.0 - std::pow(hyper.beta1, static_cast<double>(p.t)));
    const S bias2 = static_cast<S>(1.0 - std::pow(hyper.beta2, static_cast<double>(p.t)));
    const S lr = static_cast<S>(hyper.learning_rate);
    const S wd = static_cast<S>(hyper.weight_decay);
    const S eps = static_cast<S>(hyper.epsilon);
    S* w = p.node->value.ptr();
    const S* g0 = p.node->grad.ptr();
    S* m = p.m.ptr();
    S* v = p.v.ptr();
    const std::size_t n = p.node->value.numel();
    for (std::size_t i = 0; i < n; ++i) {
      const S g = g0[i] + wd * w[i];
      m[i] = b1 * m[i] + (S(1) - b1) * g;
      v[i] = b2 * v[i] + (S(1) - b2) * g * g;
      const S mhat = m[i] / bias1;
      const S vhat = v[i] / bias2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace somnilex::ad
