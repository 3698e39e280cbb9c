#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdn/nn.hpp"

namespace gradcheck {

using mdn::Matrix;

/// |a − n| / max(|a|, |n|, floor); the floor keeps entries that are zero up
/// to rounding from dominating.
inline double rel_err(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double dot(const Matrix& a, const Matrix& b) {
  return std::inner_product(a.values().begin(), a.values().end(), b.values().begin(), 0.0);
}

struct Report {
  double input = 0.0;
  double params = 0.0;
  double worst() const { return std::max(input, params); }
};

/// Central differences of L = ⟨layer(x), w⟩ against the layer's backward,
/// for the input and for every parameter entry.
inline Report check_layer(mdn::nn::Layer& layer, const Matrix& x, const mdn::nn::BatchContext& ctx,
                          const Matrix& w, double h = 1e-5) {
  auto loss = [&](const Matrix& input) { return dot(layer.forward(input, ctx), w); };
  Report report;

  auto params = layer.params();
  for (auto& p : params) p.grad->fill(0.0);
  (void)layer.forward(x, ctx);
  const Matrix grad_in = layer.backward(w);
  std::vector<Matrix> analytic;
  for (auto& p : params) analytic.push_back(*p.grad);

  if (!grad_in.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      Matrix plus = x, minus = x;
      plus.values()[i] += h;
      minus.values()[i] -= h;
      const double numeric = (loss(plus) - loss(minus)) / (2 * h);
      report.input = std::max(report.input, rel_err(grad_in.values()[i], numeric));
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].value->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss(x);
      values[i] = saved - h;
      const double down = loss(x);
      values[i] = saved;
      report.params = std::max(report.params, rel_err(analytic[k].values()[i], (up - down) / (2 * h)));
    }
  }
  return report;
}

}  // namespace gradcheck
