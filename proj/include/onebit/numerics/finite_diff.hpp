#pragma once

#include "onebit/numerics/types.hpp"

namespace onebit {

/// Central-difference gradient of a scalar function of a flat parameter vector.
template <class LossFn>
RealVec finite_diff_grad(LossFn&& loss_fn, RealVec params, double step) {
  RealVec grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss_fn(params);
    params[i] = saved - step;
    const double down = loss_fn(params);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace onebit
