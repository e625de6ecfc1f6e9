#include "bes/optim.hpp"

#include <cmath>

#include "bes/error.hpp"

namespace bes {

void adam_step(ad::ParameterSet& params, const std::vector<Matrix>& grads, AdamState& state, const AdamHyper& hyper) {
  if (grads.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "gradient count differs from parameters");
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      state.v.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& w = params[i].value;
    if (grads[i].rows() != w.rows() || grads[i].cols() != w.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient shape for " + params[i].name);
    }
    const Matrix g = hyper.weight_decay != 0.0 ? Matrix(grads[i] + hyper.weight_decay * w) : grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g.cwiseProduct(g);
    w.array() -= hyper.lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + hyper.eps);
  }
}

}  // namespace bes
