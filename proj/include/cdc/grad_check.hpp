#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "cdc/layers.hpp"

namespace cdc {

// Scalar loss used by the finite-difference check: L = 0.5 * sum(out^2).
// Its gradient with respect to the network output is the output itself.
template <class T>
T quadratic_loss(const Tensor<T>& out) {
  T acc = 0;
  for (const auto& v : out.data) acc += v * v;
  return acc / T(2);
}

// Central-difference verification of analytic gradients, intended for
// float64 networks at toy shapes. Returns the max relative error over all
// parameters and all input entries.
template <class T>
double grad_check(Network<T>& net, const Tensor<T>& input, double epsilon) {
  net.zero_grad();
  Tensor<T> out = net.forward(input);
  Tensor<T> gin = net.backward(out);  // upstream grad of quadratic_loss is out

  auto rel_err = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
  };

  double worst = 0;
  auto probe = [&](T& slot, double analytic) {
    T saved = slot;
    slot = saved + static_cast<T>(epsilon);
    double lp = static_cast<double>(quadratic_loss(net.forward(input)));
    slot = saved - static_cast<T>(epsilon);
    double lm = static_cast<double>(quadratic_loss(net.forward(input)));
    slot = saved;
    double numeric = (lp - lm) / (2 * epsilon);
    worst = std::max(worst, rel_err(analytic, numeric));
  };

  for (auto* p : net.params()) {
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      probe(p->value[i], static_cast<double>(p->grad[i]));
    }
  }
  Tensor<T> in_copy = input;
  for (std::size_t i = 0; i < in_copy.numel(); ++i) {
    T saved = in_copy[i];
    in_copy[i] = saved + static_cast<T>(epsilon);
    double lp = static_cast<double>(quadratic_loss(net.forward(in_copy)));
    in_copy[i] = saved - static_cast<T>(epsilon);
    double lm = static_cast<double>(quadratic_loss(net.forward(in_copy)));
    in_copy[i] = saved;
    double numeric = (lp - lm) / (2 * epsilon);
    worst = std::max(worst, rel_err(static_cast<double>(gin[i]), numeric));
  }
  net.zero_grad();
  return worst;
}

}  // namespace cdc
