#pragma once

#include <cstddef>
#include <vector>

#include "bes/autodiff.hpp"
#include "bes/types.hpp"

namespace bes {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t step = 0;
};

/// One Adam update of `params` in place. `grads` aligns with `params`; state is lazily sized.
void adam_step(ad::ParameterSet& params, const std::vector<Matrix>& grads, AdamState& state, const AdamHyper& hyper);

}  // namespace bes
