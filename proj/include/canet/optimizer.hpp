#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "canet/tensor.hpp"

namespace canet {

// AdamW: Adam moments with the weight decay applied directly to the
// parameters (decoupled), not folded into the gradient.
template <typename T>
struct AdamWState {
  std::vector<Tensor<T>> params;
  std::vector<std::vector<T>> m;  // first moments, one buffer per param
  std::vector<std::vector<T>> v;  // second moments
  int64_t step = 0;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
AdamWState<T> adamw_init(std::vector<Tensor<T>> params, double lr,
                         double weight_decay) {
  AdamWState<T> state;
  state.params = std::move(params);
  state.lr = lr;
  state.weight_decay = weight_decay;
  for (const auto& p : state.params) {
    state.m.emplace_back(p.size(), T(0));
    state.v.emplace_back(p.size(), T(0));
  }
  return state;
}

template <typename T>
void zero_grads(AdamWState<T>& state) {
  for (auto& p : state.params) p.zero_grad();
}

template <typename T>
void adamw_step(AdamWState<T>& state) {
  ++state.step;
  T c1 = T(1) - T(std::pow(state.beta1, static_cast<double>(state.step)));
  T c2 = T(1) - T(std::pow(state.beta2, static_cast<double>(state.step)));
  for (size_t p = 0; p < state.params.size(); ++p) {
    auto& values = state.params[p].values();
    const auto& grad = state.params[p].grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (size_t i = 0; i < values.size(); ++i) {
      m[i] = T(state.beta1) * m[i] + (T(1) - T(state.beta1)) * grad[i];
      v[i] = T(state.beta2) * v[i] + (T(1) - T(state.beta2)) * grad[i] * grad[i];
      T m_hat = m[i] / c1;
      T v_hat = v[i] / c2;
      values[i] -= T(state.lr) *
                   (m_hat / (std::sqrt(v_hat) + T(state.eps)) +
                    T(state.weight_decay) * values[i]);
    }
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification (64-bit only; run the model in
// eval mode with dropout off, since the check re-evaluates the function).

struct GradCheckEntry {
  std::string param;
  int index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  bool passed = true;
  int entries_checked = 0;
  double tolerance = 0.0;
  GradCheckEntry worst;  // largest relative error seen
};

// f: rebuilds the forward graph from the current parameter values and
// returns the scalar objective. Relative error per entry is
// |analytic - central_difference| / max(1, |central_difference|).
inline GradCheckReport grad_check(
    const std::function<Tensor<double>()>& f,
    const std::vector<std::pair<std::string, Tensor<double>>>& params,
    double h = 1e-6, double tol = 1e-6) {
  GradCheckReport report;
  report.tolerance = tol;

  for (const auto& [name, p] : params) {
    auto handle = p;  // tensors share state; copies reach the same buffers
    handle.zero_grad();
  }
  f().backward();

  std::vector<std::vector<double>> analytic;
  for (const auto& [name, p] : params) analytic.push_back(p.grad());

  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto p = params[pi].second;  // shares the underlying node
    for (int64_t i = 0; i < p.size(); ++i) {
      double saved = p.values()[i];
      p.values()[i] = saved + h;
      double up = f().item();
      p.values()[i] = saved - h;
      double down = f().item();
      p.values()[i] = saved;
      double numeric = (up - down) / (2.0 * h);
      double rel = std::abs(analytic[pi][i] - numeric) /
                   std::max(1.0, std::abs(numeric));
      ++report.entries_checked;
      if (rel > report.worst.rel_err) {
        report.worst = {params[pi].first, static_cast<int>(i),
                        analytic[pi][i], numeric, rel};
      }
      if (rel > tol) report.passed = false;
    }
  }
  return report;
}

}  // namespace canet
